//! Inter-metric correlations per video, correlation histograms, and the
//! construction of the trending quintiles (T1..T5) and recent groups (R1..R5).

use std::cmp::Ordering;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;
use crate::timeseries::AttentionSeries;

pub const DEFAULT_HISTOGRAM_BIN_WIDTH: f64 = 0.1;
pub const DEFAULT_TOP_FRACTION: f64 = 0.2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CohortError {
    #[error("series length mismatch ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 points, got {0}")]
    TooShort(usize),
    #[error("empty input")]
    Empty,
    #[error("need at least 5 videos for a quintile split, got {0}")]
    TooFewVideos(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("unknown cohort label {0:?}")]
    UnknownLabel(String),
}

/// Pearson coefficient with a flag for the zero-variance case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation<T> {
    pub rho: T,
    pub undefined: bool,
}

/// Pearson correlation. A constant series has no defined coefficient; it
/// reports `rho = 0` with `undefined` set.
pub fn pearson<T: Real>(a: &[T], b: &[T]) -> Result<Correlation<T>, CohortError> {
    if a.len() != b.len() {
        return Err(CohortError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(CohortError::TooShort(a.len()));
    }
    let n = T::from_count(a.len());
    let mean_a = a.iter().copied().sum::<T>() / n;
    let mean_b = b.iter().copied().sum::<T>() / n;
    let (mut sab, mut saa, mut sbb) = (T::zero(), T::zero(), T::zero());
    for (&x, &y) in a.iter().zip(b) {
        let dx = x - mean_a;
        let dy = y - mean_b;
        sab = sab + dx * dy;
        saa = saa + dx * dx;
        sbb = sbb + dy * dy;
    }
    let constant = |s: &[T]| s.iter().all(|&v| v == s[0]);
    if constant(a) || constant(b) || saa == T::zero() || sbb == T::zero() {
        return Ok(Correlation {
            rho: T::zero(),
            undefined: true,
        });
    }
    let rho = sab / (saa.sqrt() * sbb.sqrt());
    Ok(Correlation {
        rho: rho.max(-T::one()).min(T::one()),
        undefined: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricPair {
    ViewsLikes,
    ViewsComments,
    LikesComments,
}

impl MetricPair {
    pub const ALL: [MetricPair; 3] = [
        MetricPair::ViewsLikes,
        MetricPair::ViewsComments,
        MetricPair::LikesComments,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricPair::ViewsLikes => "views_likes",
            MetricPair::ViewsComments => "views_comments",
            MetricPair::LikesComments => "likes_comments",
        }
    }
}

impl fmt::Display for MetricPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The three pairwise correlations of one video's cumulative counters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationProfile<T> {
    pub video_id: String,
    pub rho_views_likes: T,
    pub rho_views_comments: T,
    pub rho_likes_comments: T,
    /// Indexed like [`MetricPair::ALL`].
    pub undefined_flags: [bool; 3],
}

impl<T: Real> CorrelationProfile<T> {
    pub fn compute(
        views: &AttentionSeries<T>,
        likes: &AttentionSeries<T>,
        comments: &AttentionSeries<T>,
    ) -> Result<Self, CohortError> {
        let vl = pearson(&views.cumulative, &likes.cumulative)?;
        let vc = pearson(&views.cumulative, &comments.cumulative)?;
        let lc = pearson(&likes.cumulative, &comments.cumulative)?;
        Ok(Self {
            video_id: views.video_id.clone(),
            rho_views_likes: vl.rho,
            rho_views_comments: vc.rho,
            rho_likes_comments: lc.rho,
            undefined_flags: [vl.undefined, vc.undefined, lc.undefined],
        })
    }

    pub fn rho(&self, pair: MetricPair) -> T {
        match pair {
            MetricPair::ViewsLikes => self.rho_views_likes,
            MetricPair::ViewsComments => self.rho_views_comments,
            MetricPair::LikesComments => self.rho_likes_comments,
        }
    }

    /// Mean of the three coefficients, undefined ones counting as zero.
    pub fn mean_rho(&self) -> T {
        (self.rho_views_likes + self.rho_views_comments + self.rho_likes_comments) / T::lit(3.0)
    }
}

/// Fixed-width histogram of correlation coefficients over `[-1, 1]`. The top
/// bin is closed on the right so `rho = 1` is counted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram<T> {
    pub bin_width: T,
    pub edges: Vec<T>,
    pub counts: Vec<usize>,
    pub fractions: Vec<T>,
}

impl<T: Real> Histogram<T> {
    pub fn from_values(values: &[T], bin_width: T) -> Result<Self, CohortError> {
        if values.is_empty() {
            return Err(CohortError::Empty);
        }
        if !(bin_width > T::zero()) || bin_width > T::lit(2.0) {
            return Err(CohortError::InvalidParameter("bin width must be in (0, 2]"));
        }
        let two = T::lit(2.0);
        let num_bins = ((two / bin_width) - T::lit(1e-9)).ceil().to_usize().unwrap_or(1).max(1);
        let edges: Vec<T> = (0..=num_bins)
            .map(|k| (-T::one() + T::from_count(k) * bin_width).min(T::one()))
            .collect();
        let mut counts = vec![0usize; num_bins];
        for &v in values {
            let clamped = v.max(-T::one()).min(T::one());
            // nudge values sitting on an edge into the upper bin
            let idx = ((clamped + T::one()) / bin_width + T::lit(1e-9)).floor().to_usize().unwrap_or(0);
            counts[idx.min(num_bins - 1)] += 1;
        }
        let n = T::from_count(values.len());
        let fractions = counts.iter().map(|&c| T::from_count(c) / n).collect();
        Ok(Self {
            bin_width,
            edges,
            counts,
            fractions,
        })
    }

    /// Fraction of mass in bins lying entirely inside `[lo, hi]`.
    pub fn mass_between(&self, lo: T, hi: T) -> T {
        let tol = self.bin_width * T::lit(1e-6);
        (0..self.counts.len())
            .filter(|&k| self.edges[k] >= lo - tol && self.edges[k + 1] <= hi + tol)
            .map(|k| self.fractions[k])
            .sum()
    }
}

/// Histogram of one pair's coefficients across `profiles`.
pub fn correlation_histogram<T: Real>(
    profiles: &[CorrelationProfile<T>],
    pair: MetricPair,
    bin_width: T,
) -> Result<Histogram<T>, CohortError> {
    let values: Vec<T> = profiles.iter().map(|p| p.rho(pair)).collect();
    Histogram::from_values(&values, bin_width)
}

/// Histogram of all three pairs' coefficients pooled together.
pub fn pooled_correlation_histogram<T: Real>(
    profiles: &[CorrelationProfile<T>],
    bin_width: T,
) -> Result<Histogram<T>, CohortError> {
    let values: Vec<T> = profiles
        .iter()
        .flat_map(|p| MetricPair::ALL.map(|pair| p.rho(pair)))
        .collect();
    Histogram::from_values(&values, bin_width)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CohortLabel {
    T1,
    T2,
    T3,
    T4,
    T5,
    R1,
    R2,
    R3,
    R4,
    R5,
}

impl CohortLabel {
    pub const TRENDING: [CohortLabel; 5] = [Self::T1, Self::T2, Self::T3, Self::T4, Self::T5];
    pub const RECENT: [CohortLabel; 5] = [Self::R1, Self::R2, Self::R3, Self::R4, Self::R5];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::T1 => "T1",
            Self::T2 => "T2",
            Self::T3 => "T3",
            Self::T4 => "T4",
            Self::T5 => "T5",
            Self::R1 => "R1",
            Self::R2 => "R2",
            Self::R3 => "R3",
            Self::R4 => "R4",
            Self::R5 => "R5",
        }
    }

    /// 1-based position within its partition.
    pub fn rank(self) -> usize {
        match self {
            Self::T1 | Self::R1 => 1,
            Self::T2 | Self::R2 => 2,
            Self::T3 | Self::R3 => 3,
            Self::T4 | Self::R4 => 4,
            Self::T5 | Self::R5 => 5,
        }
    }
}

impl fmt::Display for CohortLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CohortLabel {
    type Err = CohortError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::TRENDING
            .into_iter()
            .chain(Self::RECENT)
            .find(|l| l.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| CohortError::UnknownLabel(s.to_string()))
    }
}

/// Named set of videos and the rule that produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cohort {
    pub label: CohortLabel,
    pub member_ids: Vec<String>,
    pub rule: String,
}

impl Cohort {
    pub fn len(&self) -> usize {
        self.member_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.member_ids.is_empty()
    }
}

/// Group sizes for `n` items split into `k` contiguous groups; the `n mod k`
/// extras go to the lowest groups.
fn split_sizes(n: usize, k: usize) -> Vec<usize> {
    let base = n / k;
    let extra = n % k;
    (0..k).map(|i| base + usize::from(i < extra)).collect()
}

fn chunk(ordered: Vec<String>, sizes: &[usize]) -> Vec<Vec<String>> {
    let mut it = ordered.into_iter();
    sizes.iter().map(|&s| it.by_ref().take(s).collect()).collect()
}

/// Splits videos into T1..T5 by ascending total views (ties by id).
pub fn quintile_split<T: Real>(videos: &[(String, T)]) -> Result<Vec<Cohort>, CohortError> {
    if videos.len() < 5 {
        return Err(CohortError::TooFewVideos(videos.len()));
    }
    let mut sorted: Vec<&(String, T)> = videos.iter().collect();
    sorted.sort_by(|a, b| {
        a.1.partial_cmp(&b.1)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.0.cmp(&b.0))
    });
    let ordered: Vec<String> = sorted.into_iter().map(|(id, _)| id.clone()).collect();
    let groups = chunk(ordered, &split_sizes(videos.len(), 5));
    Ok(CohortLabel::TRENDING
        .into_iter()
        .zip(groups)
        .map(|(label, member_ids)| Cohort {
            label,
            member_ids,
            rule: format!("trending quintile {} by ascending total views", label.rank()),
        })
        .collect())
}

/// A recent video eligible for the R grouping.
#[derive(Debug, Clone, PartialEq)]
pub struct RecentCandidate<T> {
    pub profile: CorrelationProfile<T>,
    pub total_views: T,
}

/// Ranks recent videos by mean inter-metric correlation and returns
/// R1..R5, where R5 holds the top `fraction` (at least one video) and the
/// rest are split into four groups by ascending score.
///
/// Ties rank by total views descending, then video id.
pub fn select_top_recent<T: Real>(
    candidates: &[RecentCandidate<T>],
    fraction: T,
) -> Result<Vec<Cohort>, CohortError> {
    if candidates.is_empty() {
        return Err(CohortError::Empty);
    }
    if !(fraction > T::zero() && fraction <= T::one()) {
        return Err(CohortError::InvalidParameter("fraction must be in (0, 1]"));
    }
    let mut best_first: Vec<(&RecentCandidate<T>, T)> =
        candidates.iter().map(|c| (c, c.profile.mean_rho())).collect();
    best_first.sort_by(|(a, sa), (b, sb)| {
        sb.partial_cmp(sa)
            .unwrap_or(Ordering::Equal)
            .then_with(|| b.total_views.partial_cmp(&a.total_views).unwrap_or(Ordering::Equal))
            .then_with(|| a.profile.video_id.cmp(&b.profile.video_id))
    });
    let n = candidates.len();
    let top = (fraction * T::from_count(n))
        .floor()
        .to_usize()
        .unwrap_or(0)
        .clamp(1, n);

    let mut ids: Vec<String> = best_first.iter().map(|(c, _)| c.profile.video_id.clone()).collect();
    let rest: Vec<String> = ids.split_off(top).into_iter().rev().collect();
    let r5 = ids;
    let mut groups = chunk(rest.clone(), &split_sizes(rest.len(), 4));
    groups.push(r5);

    Ok(CohortLabel::RECENT
        .into_iter()
        .zip(groups)
        .map(|(label, member_ids)| Cohort {
            label,
            rule: if label == CohortLabel::R5 {
                format!("top {} of recent videos by mean pairwise correlation", fraction)
            } else {
                format!("recent group {} of 4 below R5 by ascending mean pairwise correlation", label.rank())
            },
            member_ids,
        })
        .collect())
}

/// Writes `video_id,label` rows.
pub fn write_cohort_csv<W: Write>(cohorts: &[Cohort], writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["video_id", "label"])?;
    for cohort in cohorts {
        for id in &cohort.member_ids {
            w.write_record([id.as_str(), cohort.label.as_str()])?;
        }
    }
    w.flush()?;
    Ok(())
}
