//! Alignment of raw counter snapshots onto a fixed polling grid, gap
//! imputation, and the two per-video normalizations (per-period share and
//! cumulative share).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

/// Six hours.
pub const DEFAULT_PERIOD_SECONDS: u64 = 21_600;
/// Fourteen days of six-hour periods.
pub const DEFAULT_NUM_PERIODS: usize = 56;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeriesError {
    #[error("no observations")]
    NoObservations,
    #[error("pre-origin observation at {observed_at} (origin {origin})")]
    PreOrigin { observed_at: i64, origin: i64 },
    #[error("unbounded gap")]
    UnboundedGap,
    #[error("series has slots pending imputation")]
    NotImputed,
    #[error("snapshots from more than one video ({0} and {1})")]
    MixedVideos(String, String),
    #[error("invalid grid: {0}")]
    InvalidGrid(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Feed {
    Trending,
    Recent,
}

impl Feed {
    pub const ALL: [Feed; 2] = [Feed::Trending, Feed::Recent];

    pub fn as_str(self) -> &'static str {
        match self {
            Feed::Trending => "trending",
            Feed::Recent => "recent",
        }
    }
}

impl fmt::Display for Feed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Feed {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "trending" => Ok(Feed::Trending),
            "recent" => Ok(Feed::Recent),
            other => Err(format!("unknown feed {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Views,
    Likes,
    Comments,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Views, Metric::Likes, Metric::Comments];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Views => "views",
            Metric::Likes => "likes",
            Metric::Comments => "comments",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "views" => Ok(Metric::Views),
            "likes" => Ok(Metric::Likes),
            "comments" => Ok(Metric::Comments),
            other => Err(format!("unknown metric {other:?}")),
        }
    }
}

/// One observation of one video's counters at one poll time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snapshot {
    pub video_id: String,
    pub feed: Feed,
    pub observed_at: i64,
    pub views: u64,
    pub likes: u64,
    pub comments: u64,
}

impl Snapshot {
    pub fn count(&self, metric: Metric) -> u64 {
        match metric {
            Metric::Views => self.views,
            Metric::Likes => self.likes,
            Metric::Comments => self.comments,
        }
    }
}

/// Fixed-width polling grid anchored at a video's first-seen time.
///
/// Slot `k` is the half-open interval `[origin + k*period, origin + (k+1)*period)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    pub origin: i64,
    pub period_seconds: u64,
    pub num_periods: usize,
}

impl Grid {
    pub fn new(origin: i64, period_seconds: u64, num_periods: usize) -> Result<Self, SeriesError> {
        if period_seconds == 0 {
            return Err(SeriesError::InvalidGrid("period_seconds must be > 0"));
        }
        if num_periods < 2 {
            return Err(SeriesError::InvalidGrid("num_periods must be >= 2"));
        }
        Ok(Self {
            origin,
            period_seconds,
            num_periods,
        })
    }

    pub fn with_defaults(origin: i64) -> Self {
        Self {
            origin,
            period_seconds: DEFAULT_PERIOD_SECONDS,
            num_periods: DEFAULT_NUM_PERIODS,
        }
    }

    /// Slot holding time `t`, or `None` if `t` falls past the window.
    /// Callers must reject `t < origin` first.
    pub fn slot_of(&self, t: i64) -> Option<usize> {
        let offset = (t - self.origin) as u64;
        let slot = (offset / self.period_seconds) as usize;
        (slot < self.num_periods).then_some(slot)
    }

    pub fn slot_start(&self, slot: usize) -> i64 {
        self.origin + (slot as u64 * self.period_seconds) as i64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizationMode {
    /// Each period's increment divided by the window total; sums to 1.
    PerPeriodShare,
    /// Running total divided by the window total; ends at 1.
    CumulativeShare,
}

impl FromStr for NormalizationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "per-period" | "per-period-share" => Ok(Self::PerPeriodShare),
            "cumulative" | "cumulative-share" => Ok(Self::CumulativeShare),
            other => Err(format!("unknown normalization mode {other:?}")),
        }
    }
}

/// One metric of one video on its grid.
///
/// Slots that had no observation are tracked as pending until
/// [`impute_missing`] fills them; `imputed_mask` marks every slot whose value
/// did not come straight from a snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionSeries<T> {
    pub video_id: String,
    pub feed: Feed,
    pub grid: Grid,
    pub metric: Metric,
    pub cumulative: Vec<T>,
    pub imputed_mask: Vec<bool>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pending: Vec<usize>,
}

impl<T: Real> AttentionSeries<T> {
    /// Series with every slot observed.
    pub fn from_cumulative(
        video_id: impl Into<String>,
        feed: Feed,
        grid: Grid,
        metric: Metric,
        cumulative: Vec<T>,
    ) -> Self {
        assert_eq!(cumulative.len(), grid.num_periods, "series length must match grid");
        let n = cumulative.len();
        Self {
            video_id: video_id.into(),
            feed,
            grid,
            metric,
            cumulative,
            imputed_mask: vec![false; n],
            pending: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.cumulative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cumulative.is_empty()
    }

    pub fn is_pending(&self, slot: usize) -> bool {
        self.pending.contains(&slot)
    }

    pub fn has_pending(&self) -> bool {
        !self.pending.is_empty()
    }

    /// Values with pending slots as `None`.
    pub fn slots(&self) -> Vec<Option<T>> {
        (0..self.len())
            .map(|k| (!self.is_pending(k)).then(|| self.cumulative[k]))
            .collect()
    }

    /// Number of slots from the start of the grid through the last observed
    /// slot. A video that disappears early has fewer observable slots.
    pub fn observable_periods(&self) -> usize {
        (0..self.len())
            .rev()
            .find(|&k| !self.is_pending(k))
            .map_or(0, |k| k + 1)
    }

    pub fn final_value(&self) -> T {
        self.cumulative.last().copied().unwrap_or_else(T::zero)
    }

    /// Multiplies every value by `factor`.
    pub fn scaled(&self, factor: T) -> Self {
        let mut out = self.clone();
        out.cumulative.iter_mut().for_each(|v| *v = *v * factor);
        out
    }
}

/// Places each snapshot's counter into its grid slot. Later snapshots in the
/// same slot replace earlier ones; observations past the window are ignored.
pub fn align_snapshots<T: Real>(
    snapshots: &[Snapshot],
    metric: Metric,
    grid: Grid,
) -> Result<AttentionSeries<T>, SeriesError> {
    let first = snapshots.first().ok_or(SeriesError::NoObservations)?;
    let mut ordered: Vec<&Snapshot> = snapshots.iter().collect();
    ordered.sort_by_key(|s| s.observed_at);

    let mut slots: Vec<Option<T>> = vec![None; grid.num_periods];
    for snap in ordered {
        if snap.video_id != first.video_id {
            return Err(SeriesError::MixedVideos(
                first.video_id.clone(),
                snap.video_id.clone(),
            ));
        }
        if snap.observed_at < grid.origin {
            return Err(SeriesError::PreOrigin {
                observed_at: snap.observed_at,
                origin: grid.origin,
            });
        }
        if let Some(slot) = grid.slot_of(snap.observed_at) {
            slots[slot] = Some(T::from_u64(snap.count(metric)).expect("count fits scalar"));
        }
    }

    let pending: Vec<usize> = (0..slots.len()).filter(|&k| slots[k].is_none()).collect();
    let imputed_mask = slots.iter().map(Option::is_none).collect();
    Ok(AttentionSeries {
        video_id: first.video_id.clone(),
        feed: first.feed,
        grid,
        metric,
        cumulative: slots.into_iter().map(|v| v.unwrap_or_else(T::zero)).collect(),
        imputed_mask,
        pending,
    })
}

/// Fills pending slots from their observed neighbours. A single missing slot
/// gets the mean of the slots on either side; longer runs are linearly
/// interpolated between the two bounding observations.
pub fn impute_missing<T: Real>(series: &AttentionSeries<T>) -> Result<AttentionSeries<T>, SeriesError> {
    let mut out = series.clone();
    if !series.has_pending() {
        return Ok(out);
    }
    let n = series.len();
    if series.pending.len() == n {
        return Err(SeriesError::NoObservations);
    }
    if series.is_pending(0) || series.is_pending(n - 1) {
        return Err(SeriesError::UnboundedGap);
    }

    let observed: Vec<bool> = (0..n).map(|k| !series.is_pending(k)).collect();
    let mut k = 0;
    while k < n {
        if observed[k] {
            k += 1;
            continue;
        }
        let left = k - 1;
        let right = (k..n).find(|&j| observed[j]).expect("last slot is observed");
        let a = series.cumulative[left];
        let b = series.cumulative[right];
        let span = T::from_count(right - left);
        for j in k..right {
            let frac = T::from_count(j - left) / span;
            out.cumulative[j] = if right - left == 2 {
                (a + b) / T::lit(2.0)
            } else {
                a + (b - a) * frac
            };
            out.imputed_mask[j] = true;
        }
        k = right;
    }
    out.pending.clear();
    Ok(out)
}

/// Per-period increments; decreases in the raw counter clamp to zero.
pub fn to_per_period<T: Real>(series: &AttentionSeries<T>) -> Result<Vec<T>, SeriesError> {
    if series.has_pending() {
        return Err(SeriesError::NotImputed);
    }
    let c = &series.cumulative;
    let mut out = Vec::with_capacity(c.len());
    if let Some(&first) = c.first() {
        out.push(first.max(T::zero()));
    }
    out.extend(c.windows(2).map(|w| (w[1] - w[0]).max(T::zero())));
    Ok(out)
}

/// Running sum of the clamped increments: the nondecreasing repair of the
/// raw cumulative series.
pub fn clamped_cumulative<T: Real>(series: &AttentionSeries<T>) -> Result<Vec<T>, SeriesError> {
    let per_period = to_per_period(series)?;
    Ok(running_sum(&per_period))
}

fn running_sum<T: Real>(values: &[T]) -> Vec<T> {
    values
        .iter()
        .scan(T::zero(), |acc, &v| {
            *acc = *acc + v;
            Some(*acc)
        })
        .collect()
}

/// Output of [`normalize`].
#[derive(Debug, Clone, PartialEq)]
pub struct Normalized<T> {
    pub values: Vec<T>,
    /// No attention over the whole window; `values` is all zeros.
    pub zero_attention: bool,
}

pub fn normalize<T: Real>(
    series: &AttentionSeries<T>,
    mode: NormalizationMode,
) -> Result<Normalized<T>, SeriesError> {
    let per_period = to_per_period(series)?;
    let cumulative = running_sum(&per_period);
    let total = cumulative.last().copied().unwrap_or_else(T::zero);
    if !(total > T::zero()) {
        return Ok(Normalized {
            values: vec![T::zero(); per_period.len()],
            zero_attention: true,
        });
    }
    let values = match mode {
        NormalizationMode::PerPeriodShare => per_period.iter().map(|&v| v / total).collect(),
        NormalizationMode::CumulativeShare => {
            let mut v: Vec<T> = cumulative.iter().map(|&c| (c / total).min(T::one())).collect();
            if let Some(last) = v.last_mut() {
                *last = T::one();
            }
            v
        }
    };
    Ok(Normalized {
        values,
        zero_attention: false,
    })
}

/// The three counters of one video on a shared grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoSeries<T> {
    pub video_id: String,
    pub feed: Feed,
    pub views: AttentionSeries<T>,
    pub likes: AttentionSeries<T>,
    pub comments: AttentionSeries<T>,
}

impl<T: Real> VideoSeries<T> {
    /// Aligns one video's snapshots onto a grid anchored at its first
    /// observation.
    pub fn from_snapshots(
        snapshots: &[Snapshot],
        period_seconds: u64,
        num_periods: usize,
    ) -> Result<Self, SeriesError> {
        let origin = snapshots
            .iter()
            .map(|s| s.observed_at)
            .min()
            .ok_or(SeriesError::NoObservations)?;
        let grid = Grid::new(origin, period_seconds, num_periods)?;
        let views = align_snapshots(snapshots, Metric::Views, grid)?;
        Ok(Self {
            video_id: views.video_id.clone(),
            feed: views.feed,
            likes: align_snapshots(snapshots, Metric::Likes, grid)?,
            comments: align_snapshots(snapshots, Metric::Comments, grid)?,
            views,
        })
    }

    pub fn metric(&self, metric: Metric) -> &AttentionSeries<T> {
        match metric {
            Metric::Views => &self.views,
            Metric::Likes => &self.likes,
            Metric::Comments => &self.comments,
        }
    }

    pub fn observable_periods(&self) -> usize {
        self.views.observable_periods()
    }

    pub fn impute(&self) -> Result<Self, SeriesError> {
        Ok(Self {
            video_id: self.video_id.clone(),
            feed: self.feed,
            views: impute_missing(&self.views)?,
            likes: impute_missing(&self.likes)?,
            comments: impute_missing(&self.comments)?,
        })
    }

    /// Multiplies every counter by `factor`.
    pub fn scaled(&self, factor: T) -> Self {
        Self {
            video_id: self.video_id.clone(),
            feed: self.feed,
            views: self.views.scaled(factor),
            likes: self.likes.scaled(factor),
            comments: self.comments.scaled(factor),
        }
    }
}

/// Keeps videos observed through at least `min_periods` slots and returns them
/// imputed. Videos that disappeared early, or whose gaps cannot be bounded
/// on both sides, are dropped.
pub fn filter_eligible<T: Real>(videos: &[VideoSeries<T>], min_periods: usize) -> Vec<VideoSeries<T>> {
    videos
        .iter()
        .filter(|v| v.observable_periods() >= min_periods)
        .filter_map(|v| v.impute().ok())
        .collect()
}
