//! Binned attention distributions and the entropy / divergence measures
//! computed over them.
//!
//! A distribution here is a histogram of per-video attention shares (each a
//! value in `[0, 1]`) over fixed-width bins. Two groups binned with the same
//! [`BinningConfig`] share their support, which is what makes the divergence
//! between them well defined.
//!
//! All logarithms are natural. Divergences are computed on additively
//! smoothed copies so that empty bins never produce infinities:
//!
//! ```text
//! p~_i = (p_i + eps) / (1 + B * eps)
//! H(p)      = sum_i p_i ln(1 / p_i)
//! D(p || q) = sum_i p~_i ln(p~_i / q~_i)
//! delta     = (D(p~ || q~) + D(q~ || p~)) / (H(p~) + H(q~))
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

pub const DEFAULT_BINS: usize = 32;
pub const DEFAULT_EPSILON: f64 = 1e-9;

/// Tolerance on `sum(probs) == 1`.
const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InfoError {
    #[error("empty group")]
    EmptyGroup,
    #[error("value {value} outside [0, 1]")]
    OutOfRange { value: f64 },
    #[error("incomparable supports")]
    IncomparableSupports,
    #[error("invalid binning config: {0}")]
    InvalidConfig(&'static str),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(&'static str),
}

/// Fixed-width binning over `[0, 1]` plus the smoothing applied before any
/// divergence computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinningConfig<T> {
    pub num_bins: usize,
    pub smoothing_epsilon: T,
}

impl<T: Real> Default for BinningConfig<T> {
    fn default() -> Self {
        Self {
            num_bins: DEFAULT_BINS,
            smoothing_epsilon: T::lit(DEFAULT_EPSILON),
        }
    }
}

impl<T: Real> BinningConfig<T> {
    pub fn new(num_bins: usize, smoothing_epsilon: T) -> Result<Self, InfoError> {
        let config = Self {
            num_bins,
            smoothing_epsilon,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), InfoError> {
        if self.num_bins < 2 {
            return Err(InfoError::InvalidConfig("num_bins must be >= 2"));
        }
        if !(self.smoothing_epsilon > T::zero()) || !self.smoothing_epsilon.is_finite() {
            return Err(InfoError::InvalidConfig("smoothing_epsilon must be > 0"));
        }
        Ok(())
    }

    /// `num_bins + 1` evenly spaced edges from 0 to 1.
    pub fn edges(&self) -> Vec<T> {
        let b = T::from_count(self.num_bins);
        (0..=self.num_bins).map(|k| T::from_count(k) / b).collect()
    }

    /// Bin index of a value in `[0, 1]`; `1.0` lands in the last bin.
    pub fn bin_index(&self, value: T) -> usize {
        let raw = (value * T::from_count(self.num_bins)).floor();
        raw.to_usize().unwrap_or(0).min(self.num_bins - 1)
    }
}

/// Normalized histogram over a fixed set of bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityDistribution<T> {
    bin_edges: Vec<T>,
    probs: Vec<T>,
}

impl<T: Real> ProbabilityDistribution<T> {
    /// Wraps explicit probabilities over evenly spaced bins on `[0, 1]`.
    pub fn from_probs(probs: Vec<T>) -> Result<Self, InfoError> {
        if probs.len() < 2 {
            return Err(InfoError::InvalidDistribution("need at least two bins"));
        }
        let b = T::from_count(probs.len());
        let edges = (0..=probs.len()).map(|k| T::from_count(k) / b).collect();
        Self::with_edges(edges, probs)
    }

    pub fn with_edges(bin_edges: Vec<T>, probs: Vec<T>) -> Result<Self, InfoError> {
        if bin_edges.len() != probs.len() + 1 {
            return Err(InfoError::InvalidDistribution("edge count must be bins + 1"));
        }
        if bin_edges.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(InfoError::InvalidDistribution("edges must be strictly increasing"));
        }
        if probs.iter().any(|p| !(*p >= T::zero()) || !p.is_finite()) {
            return Err(InfoError::InvalidDistribution("negative or non-finite probability"));
        }
        let total: T = probs.iter().copied().sum();
        if (total - T::one()).abs() > T::lit(SUM_TOLERANCE).max(T::epsilon() * T::from_count(probs.len())) {
            return Err(InfoError::InvalidDistribution("probabilities must sum to 1"));
        }
        Ok(Self { bin_edges, probs })
    }

    pub fn bin_edges(&self) -> &[T] {
        &self.bin_edges
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn num_bins(&self) -> usize {
        self.probs.len()
    }

    /// Copy with `epsilon` added to every bin, renormalized.
    pub fn smoothed(&self, epsilon: T) -> Self {
        let denom = T::one() + T::from_count(self.probs.len()) * epsilon;
        Self {
            bin_edges: self.bin_edges.clone(),
            probs: self.probs.iter().map(|&p| (p + epsilon) / denom).collect(),
        }
    }

    fn same_support(&self, other: &Self) -> Result<(), InfoError> {
        if self.bin_edges == other.bin_edges {
            Ok(())
        } else {
            Err(InfoError::IncomparableSupports)
        }
    }
}

/// Shannon entropy, raw and normalized by `ln(B)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyValue<T> {
    pub normalized: T,
    pub raw_nats: T,
}

/// Symmetric normalized divergence together with both directed terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceValue<T> {
    pub delta: T,
    pub d_pq: T,
    pub d_qp: T,
}

/// Histogram of `values` over the configured bins, normalized to sum 1.
pub fn build_distribution<T: Real>(
    values: &[T],
    config: &BinningConfig<T>,
) -> Result<ProbabilityDistribution<T>, InfoError> {
    config.validate()?;
    if values.is_empty() {
        return Err(InfoError::EmptyGroup);
    }
    let mut counts = vec![0usize; config.num_bins];
    for &v in values {
        if !(v >= T::zero() && v <= T::one()) {
            return Err(InfoError::OutOfRange {
                value: v.to_f64_lossy(),
            });
        }
        counts[config.bin_index(v)] += 1;
    }
    let n = T::from_count(values.len());
    Ok(ProbabilityDistribution {
        bin_edges: config.edges(),
        probs: counts.into_iter().map(|c| T::from_count(c) / n).collect(),
    })
}

fn entropy_nats<T: Real>(probs: &[T]) -> T {
    probs
        .iter()
        .filter(|&&p| p > T::zero())
        .map(|&p| p * (T::one() / p).ln())
        .sum()
}

pub fn entropy<T: Real>(p: &ProbabilityDistribution<T>) -> EntropyValue<T> {
    let raw_nats = entropy_nats(&p.probs);
    let scale = T::from_count(p.num_bins()).ln();
    EntropyValue {
        normalized: raw_nats / scale,
        raw_nats,
    }
}

/// Directed sum over already-smoothed (strictly positive) probabilities.
fn directed<T: Real>(p: &[T], q: &[T]) -> T {
    p.iter()
        .zip(q)
        .map(|(&pi, &qi)| if pi > T::zero() { pi * (pi / qi).ln() } else { T::zero() })
        .sum()
}

/// `D(p || q)` in nats, computed on smoothed copies of both inputs.
pub fn kl_divergence<T: Real>(
    p: &ProbabilityDistribution<T>,
    q: &ProbabilityDistribution<T>,
    epsilon: T,
) -> Result<T, InfoError> {
    p.same_support(q)?;
    let ps = p.smoothed(epsilon);
    let qs = q.smoothed(epsilon);
    Ok(directed(&ps.probs, &qs.probs))
}

/// Symmetric normalized divergence. Unbounded above.
pub fn symmetric_divergence<T: Real>(
    p: &ProbabilityDistribution<T>,
    q: &ProbabilityDistribution<T>,
    epsilon: T,
) -> Result<DivergenceValue<T>, InfoError> {
    p.same_support(q)?;
    let ps = p.smoothed(epsilon);
    let qs = q.smoothed(epsilon);
    let d_pq = directed(&ps.probs, &qs.probs);
    let d_qp = directed(&qs.probs, &ps.probs);
    let numerator = d_pq + d_qp;
    let denominator = entropy_nats(&ps.probs) + entropy_nats(&qs.probs);
    let delta = if numerator == T::zero() || (denominator < T::lit(1e-12) && ps.probs == qs.probs) {
        T::zero()
    } else {
        // denominator is strictly positive for any eps > 0
        numerator / denominator.max(T::min_positive_value())
    };
    Ok(DivergenceValue { delta, d_pq, d_qp })
}
