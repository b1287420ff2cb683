//! Entropy curves, between-group divergence curves and matrices, and
//! time-lagged within-group divergence over a set of cohorts.
//!
//! Every analysis works period by period: at period `t` a cohort is reduced
//! to the histogram of its members' normalized attention at `t`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cohorts::CohortLabel;
use crate::infotheory::{
    build_distribution, entropy, symmetric_divergence, BinningConfig, InfoError,
    ProbabilityDistribution,
};
use crate::scalar::Real;
use crate::timeseries::{normalize, AttentionSeries, Metric, NormalizationMode, SeriesError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("empty cohort {0}")]
    EmptyCohort(CohortLabel),
    #[error("cohort {label} mixes series of length {expected} and {found}")]
    RaggedCohort {
        label: CohortLabel,
        expected: usize,
        found: usize,
    },
    #[error("need at least {needed} periods, got {found}")]
    TooFewPeriods { needed: usize, found: usize },
    #[error("curve length mismatch ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} cohorts, got {found}")]
    TooFewCohorts { needed: usize, found: usize },
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Info(#[from] InfoError),
}

/// A cohort resolved to the series of one metric for each member.
#[derive(Debug, Clone, Copy)]
pub struct CohortSeries<'a, T> {
    pub label: CohortLabel,
    pub members: &'a [&'a AttentionSeries<T>],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyCurve<T> {
    pub cohort: CohortLabel,
    pub metric: Metric,
    /// Normalized entropy per period, in `[0, 1]`.
    pub entropy: Vec<T>,
    pub entropy_nats: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropySummary<T> {
    pub mean: Vec<T>,
    /// Population variance across cohorts.
    pub variance: Vec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DivergenceKind {
    /// Cohort A versus cohort B at the same period.
    Between,
    /// One cohort at period `t - 1` versus period `t`.
    Lagged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceCurve<T> {
    pub kind: DivergenceKind,
    pub cohort_a: CohortLabel,
    pub cohort_b: CohortLabel,
    pub metric: Metric,
    /// For lagged curves entry `i` compares period `i` with period `i + 1`.
    pub delta: Vec<T>,
    pub d_ab: Vec<T>,
    pub d_ba: Vec<T>,
}

impl<T: Real> DivergenceCurve<T> {
    pub fn mean_delta(&self) -> T {
        if self.delta.is_empty() {
            return T::zero();
        }
        self.delta.iter().copied().sum::<T>() / T::from_count(self.delta.len())
    }

    /// Index of the largest delta; first one wins on ties.
    pub fn argmax(&self) -> Option<usize> {
        let mut best: Option<(usize, T)> = None;
        for (i, &d) in self.delta.iter().enumerate() {
            if best.is_none_or(|(_, b)| d > b) {
                best = Some((i, d));
            }
        }
        best.map(|(i, _)| i)
    }
}

/// Mean-over-time delta for every pair of cohorts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceMatrix<T> {
    pub labels: Vec<CohortLabel>,
    pub values: Vec<Vec<T>>,
}

impl<T: Real> DivergenceMatrix<T> {
    pub fn get(&self, a: CohortLabel, b: CohortLabel) -> Option<T> {
        let i = self.labels.iter().position(|&l| l == a)?;
        let j = self.labels.iter().position(|&l| l == b)?;
        Some(self.values[i][j])
    }
}

fn num_periods<T>(cohort: &CohortSeries<'_, T>) -> Result<usize, AnalysisError> {
    let first = cohort
        .members
        .first()
        .ok_or(AnalysisError::EmptyCohort(cohort.label))?;
    let expected = first.cumulative.len();
    if let Some(bad) = cohort.members.iter().find(|s| s.cumulative.len() != expected) {
        return Err(AnalysisError::RaggedCohort {
            label: cohort.label,
            expected,
            found: bad.cumulative.len(),
        });
    }
    Ok(expected)
}

fn metric_of<T>(cohort: &CohortSeries<'_, T>) -> Metric {
    cohort.members.first().map_or(Metric::Views, |s| s.metric)
}

/// One distribution per period over the members' normalized values.
pub fn period_distributions<T: Real>(
    cohort: &CohortSeries<'_, T>,
    mode: NormalizationMode,
    binning: &BinningConfig<T>,
) -> Result<Vec<ProbabilityDistribution<T>>, AnalysisError> {
    let periods = num_periods(cohort)?;
    let normalized: Vec<Vec<T>> = cohort
        .members
        .iter()
        .map(|s| normalize(s, mode).map(|n| n.values))
        .collect::<Result<_, _>>()?;
    (0..periods)
        .map(|t| {
            let column: Vec<T> = normalized.iter().map(|v| v[t]).collect();
            build_distribution(&column, binning).map_err(AnalysisError::from)
        })
        .collect()
}

pub fn entropy_curve<T: Real>(
    cohort: &CohortSeries<'_, T>,
    binning: &BinningConfig<T>,
    mode: NormalizationMode,
) -> Result<EntropyCurve<T>, AnalysisError> {
    let dists = period_distributions(cohort, mode, binning)?;
    let values: Vec<_> = dists.iter().map(entropy).collect();
    Ok(EntropyCurve {
        cohort: cohort.label,
        metric: metric_of(cohort),
        entropy: values.iter().map(|e| e.normalized).collect(),
        entropy_nats: values.iter().map(|e| e.raw_nats).collect(),
    })
}

/// Pointwise mean and population variance across curves.
pub fn entropy_summary<T: Real>(curves: &[EntropyCurve<T>]) -> Result<EntropySummary<T>, AnalysisError> {
    let first = curves.first().ok_or(AnalysisError::TooFewCohorts { needed: 1, found: 0 })?;
    let len = first.entropy.len();
    if let Some(bad) = curves.iter().find(|c| c.entropy.len() != len) {
        return Err(AnalysisError::LengthMismatch(len, bad.entropy.len()));
    }
    let n = T::from_count(curves.len());
    let mut mean = Vec::with_capacity(len);
    let mut variance = Vec::with_capacity(len);
    for t in 0..len {
        let m = curves.iter().map(|c| c.entropy[t]).sum::<T>() / n;
        let v = curves
            .iter()
            .map(|c| (c.entropy[t] - m) * (c.entropy[t] - m))
            .sum::<T>()
            / n;
        mean.push(m);
        variance.push(v.max(T::zero()));
    }
    Ok(EntropySummary { mean, variance })
}

fn between_from_dists<T: Real>(
    a: CohortLabel,
    b: CohortLabel,
    metric: Metric,
    pa: &[ProbabilityDistribution<T>],
    pb: &[ProbabilityDistribution<T>],
    epsilon: T,
) -> Result<DivergenceCurve<T>, AnalysisError> {
    if pa.len() != pb.len() {
        return Err(AnalysisError::LengthMismatch(pa.len(), pb.len()));
    }
    let mut curve = DivergenceCurve {
        kind: DivergenceKind::Between,
        cohort_a: a,
        cohort_b: b,
        metric,
        delta: Vec::with_capacity(pa.len()),
        d_ab: Vec::with_capacity(pa.len()),
        d_ba: Vec::with_capacity(pa.len()),
    };
    for (p, q) in pa.iter().zip(pb) {
        let v = symmetric_divergence(p, q, epsilon)?;
        curve.delta.push(v.delta);
        curve.d_ab.push(v.d_pq);
        curve.d_ba.push(v.d_qp);
    }
    Ok(curve)
}

pub fn group_divergence_curve<T: Real>(
    a: &CohortSeries<'_, T>,
    b: &CohortSeries<'_, T>,
    binning: &BinningConfig<T>,
    mode: NormalizationMode,
) -> Result<DivergenceCurve<T>, AnalysisError> {
    let pa = period_distributions(a, mode, binning)?;
    let pb = period_distributions(b, mode, binning)?;
    between_from_dists(a.label, b.label, metric_of(a), &pa, &pb, binning.smoothing_epsilon)
}

/// All pairwise between-group curves (in `i < j` order) and the matrix of
/// their time means.
pub fn divergence_curves_and_matrix<T: Real>(
    cohorts: &[CohortSeries<'_, T>],
    binning: &BinningConfig<T>,
    mode: NormalizationMode,
) -> Result<(Vec<DivergenceCurve<T>>, DivergenceMatrix<T>), AnalysisError> {
    if cohorts.len() < 2 {
        return Err(AnalysisError::TooFewCohorts {
            needed: 2,
            found: cohorts.len(),
        });
    }
    let dists: Vec<Vec<ProbabilityDistribution<T>>> = cohorts
        .iter()
        .map(|c| period_distributions(c, mode, binning))
        .collect::<Result<_, _>>()?;
    let n = cohorts.len();
    let mut values = vec![vec![T::zero(); n]; n];
    let mut curves = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let curve = between_from_dists(
                cohorts[i].label,
                cohorts[j].label,
                metric_of(&cohorts[i]),
                &dists[i],
                &dists[j],
                binning.smoothing_epsilon,
            )?;
            let m = curve.mean_delta();
            values[i][j] = m;
            values[j][i] = m;
            curves.push(curve);
        }
    }
    let matrix = DivergenceMatrix {
        labels: cohorts.iter().map(|c| c.label).collect(),
        values,
    };
    Ok((curves, matrix))
}

pub fn divergence_matrix<T: Real>(
    cohorts: &[CohortSeries<'_, T>],
    binning: &BinningConfig<T>,
    mode: NormalizationMode,
) -> Result<DivergenceMatrix<T>, AnalysisError> {
    divergence_curves_and_matrix(cohorts, binning, mode).map(|(_, m)| m)
}

pub fn lagged_divergence_curve<T: Real>(
    cohort: &CohortSeries<'_, T>,
    binning: &BinningConfig<T>,
    mode: NormalizationMode,
) -> Result<DivergenceCurve<T>, AnalysisError> {
    let dists = period_distributions(cohort, mode, binning)?;
    if dists.len() < 2 {
        return Err(AnalysisError::TooFewPeriods {
            needed: 2,
            found: dists.len(),
        });
    }
    let mut curve = between_from_dists(
        cohort.label,
        cohort.label,
        metric_of(cohort),
        &dists[..dists.len() - 1],
        &dists[1..],
        binning.smoothing_epsilon,
    )?;
    curve.kind = DivergenceKind::Lagged;
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timeseries::{Feed, Grid};

    fn series(id: &str, cumulative: &[f64]) -> AttentionSeries<f64> {
        let grid = Grid::new(0, 21_600, cumulative.len()).unwrap();
        AttentionSeries::from_cumulative(id, Feed::Trending, grid, Metric::Views, cumulative.to_vec())
    }

    fn binning() -> BinningConfig<f64> {
        BinningConfig::default()
    }

    #[test]
    fn identical_trajectories_have_zero_entropy() {
        let a = series("a", &[10.0, 30.0, 60.0, 100.0]);
        let b = series("b", &[1000.0, 3000.0, 6000.0, 10000.0]);
        let members = [&a, &b];
        let c = CohortSeries { label: CohortLabel::T1, members: &members };
        let curve = entropy_curve(&c, &binning(), NormalizationMode::PerPeriodShare).unwrap();
        assert_eq!(curve.entropy, vec![0.0; 4]);
    }

    #[test]
    fn summary_hand_values() {
        let mk = |v: f64| EntropyCurve {
            cohort: CohortLabel::T1,
            metric: Metric::Views,
            entropy: vec![v],
            entropy_nats: vec![v],
        };
        let s = entropy_summary(&[mk(0.4), mk(0.6)]).unwrap();
        assert!((s.mean[0] - 0.5).abs() < 1e-15);
        assert!((s.variance[0] - 0.01).abs() < 1e-15);
        let same = entropy_summary(&vec![mk(0.3); 6]).unwrap();
        assert_eq!(same.variance, vec![0.0]);
    }

    #[test]
    fn summary_rejects_mismatch() {
        let a = EntropyCurve { cohort: CohortLabel::T1, metric: Metric::Views, entropy: vec![0.1], entropy_nats: vec![0.1] };
        let mut b = a.clone();
        b.entropy.push(0.2);
        assert_eq!(entropy_summary(&[a, b]), Err(AnalysisError::LengthMismatch(1, 2)));
    }

    #[test]
    fn self_divergence_is_zero() {
        let a = series("a", &[10.0, 30.0, 60.0, 100.0]);
        let b = series("b", &[50.0, 60.0, 90.0, 100.0]);
        let members = [&a, &b];
        let c1 = CohortSeries { label: CohortLabel::T1, members: &members };
        let c2 = CohortSeries { label: CohortLabel::T2, members: &members };
        let curve = group_divergence_curve(&c1, &c2, &binning(), NormalizationMode::CumulativeShare).unwrap();
        assert_eq!(curve.delta, vec![0.0; 4]);
        let m = divergence_matrix(&[c1, c2], &binning(), NormalizationMode::CumulativeShare).unwrap();
        assert_eq!(m.values, vec![vec![0.0, 0.0], vec![0.0, 0.0]]);
    }

    #[test]
    fn constant_distribution_has_zero_lagged_divergence() {
        let a = series("a", &[100.0, 100.0, 100.0]);
        let members = [&a];
        let c = CohortSeries { label: CohortLabel::R5, members: &members };
        let curve = lagged_divergence_curve(&c, &binning(), NormalizationMode::CumulativeShare).unwrap();
        assert_eq!(curve.delta, vec![0.0, 0.0]);
        assert_eq!(curve.kind, DivergenceKind::Lagged);
    }

    #[test]
    fn empty_cohort_rejected() {
        let c = CohortSeries::<f64> { label: CohortLabel::T3, members: &[] };
        assert_eq!(
            entropy_curve(&c, &binning(), NormalizationMode::PerPeriodShare),
            Err(AnalysisError::EmptyCohort(CohortLabel::T3))
        );
    }

    #[test]
    fn argmax_first_wins() {
        let c = DivergenceCurve {
            kind: DivergenceKind::Lagged,
            cohort_a: CohortLabel::T1,
            cohort_b: CohortLabel::T1,
            metric: Metric::Views,
            delta: vec![0.1, 0.5, 0.5, 0.2],
            d_ab: vec![],
            d_ba: vec![],
        };
        assert_eq!(c.argmax(), Some(1));
    }
}
