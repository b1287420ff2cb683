//! End-to-end analysis: snapshots in, [`Report`] out.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{self, AnalysisError, CohortSeries};
use crate::cohorts::{
    self, correlation_histogram, pooled_correlation_histogram, quintile_split, select_top_recent,
    CohortError, CohortLabel, CorrelationProfile, RecentCandidate, DEFAULT_HISTOGRAM_BIN_WIDTH,
    DEFAULT_TOP_FRACTION,
};
use crate::infotheory::{BinningConfig, InfoError};
use crate::report::{FeedHistograms, PairHistogram, Report, RunSummary};
use crate::timeseries::{
    filter_eligible, Feed, Metric, NormalizationMode, SeriesError, Snapshot, VideoSeries,
    DEFAULT_NUM_PERIODS, DEFAULT_PERIOD_SECONDS,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("no observations")]
    NoObservations,
    #[error("video {0} appears under both feeds")]
    FeedConflict(String),
    #[error("need at least 5 eligible trending videos, found {0}")]
    TooFewTrending(usize),
    #[error("no eligible recent videos")]
    NoRecent,
    #[error("invalid analysis config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Cohort(#[from] CohortError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Info(#[from] InfoError),
}

/// Every knob of an analysis run; echoed verbatim into the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    pub period_seconds: u64,
    pub num_periods: usize,
    /// Defaults to `num_periods`.
    pub min_periods: Option<usize>,
    pub bins: usize,
    pub epsilon: f64,
    pub metric: Metric,
    pub top_fraction: f64,
    pub histogram_bin_width: f64,
    pub entropy_mode: NormalizationMode,
    pub divergence_mode: NormalizationMode,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            period_seconds: DEFAULT_PERIOD_SECONDS,
            num_periods: DEFAULT_NUM_PERIODS,
            min_periods: None,
            bins: crate::infotheory::DEFAULT_BINS,
            epsilon: crate::infotheory::DEFAULT_EPSILON,
            metric: Metric::Views,
            top_fraction: DEFAULT_TOP_FRACTION,
            histogram_bin_width: DEFAULT_HISTOGRAM_BIN_WIDTH,
            entropy_mode: NormalizationMode::PerPeriodShare,
            divergence_mode: NormalizationMode::CumulativeShare,
        }
    }
}

impl AnalysisConfig {
    pub fn binning(&self) -> Result<BinningConfig<f64>, InfoError> {
        BinningConfig::new(self.bins, self.epsilon)
    }

    pub fn effective_min_periods(&self) -> usize {
        self.min_periods.unwrap_or(self.num_periods)
    }

    fn validate(&self) -> Result<(), PipelineError> {
        if self.period_seconds == 0 {
            return Err(PipelineError::InvalidConfig("period_seconds must be > 0".into()));
        }
        if self.num_periods < 2 {
            return Err(PipelineError::InvalidConfig("num_periods must be >= 2".into()));
        }
        if self.effective_min_periods() > self.num_periods {
            return Err(PipelineError::InvalidConfig("min_periods exceeds num_periods".into()));
        }
        self.binning()?;
        Ok(())
    }
}

/// Groups snapshots by video and aligns each video onto its grid.
pub fn group_snapshots(
    snapshots: &[Snapshot],
    period_seconds: u64,
    num_periods: usize,
) -> Result<Vec<VideoSeries<f64>>, PipelineError> {
    if snapshots.is_empty() {
        return Err(PipelineError::NoObservations);
    }
    let mut by_video: BTreeMap<&str, Vec<Snapshot>> = BTreeMap::new();
    for s in snapshots {
        let entry = by_video.entry(s.video_id.as_str()).or_default();
        if entry.first().is_some_and(|f| f.feed != s.feed) {
            return Err(PipelineError::FeedConflict(s.video_id.clone()));
        }
        entry.push(s.clone());
    }
    by_video
        .values()
        .map(|snaps| VideoSeries::from_snapshots(snaps, period_seconds, num_periods).map_err(Into::into))
        .collect()
}

/// Ingests raw snapshots, drops ineligible videos, and runs every analysis.
pub fn analyze_snapshots(snapshots: &[Snapshot], config: &AnalysisConfig) -> Result<Report, PipelineError> {
    config.validate()?;
    let videos = group_snapshots(snapshots, config.period_seconds, config.num_periods)?;
    let eligible = filter_eligible(&videos, config.effective_min_periods());
    let mut report = analyze_videos(&eligible, config)?;
    report.summary.snapshots = snapshots.len();
    report.summary.videos_seen = videos.len();
    Ok(report)
}

/// Runs every analysis over already-imputed, eligible videos.
pub fn analyze_videos(videos: &[VideoSeries<f64>], config: &AnalysisConfig) -> Result<Report, PipelineError> {
    config.validate()?;
    let binning = config.binning()?;
    if let Some(bad) = videos.iter().find(|v| v.views.len() != config.num_periods) {
        return Err(PipelineError::InvalidConfig(format!(
            "video {} has {} periods, expected {}",
            bad.video_id,
            bad.views.len(),
            config.num_periods
        )));
    }

    let trending: Vec<&VideoSeries<f64>> = videos.iter().filter(|v| v.feed == Feed::Trending).collect();
    let recent: Vec<&VideoSeries<f64>> = videos.iter().filter(|v| v.feed == Feed::Recent).collect();
    if trending.len() < 5 {
        return Err(PipelineError::TooFewTrending(trending.len()));
    }
    if recent.is_empty() {
        return Err(PipelineError::NoRecent);
    }

    let profiles = |set: &[&VideoSeries<f64>]| -> Result<Vec<CorrelationProfile<f64>>, CohortError> {
        set.iter()
            .map(|v| CorrelationProfile::compute(&v.views, &v.likes, &v.comments))
            .collect()
    };
    let trending_profiles = profiles(&trending)?;
    let recent_profiles = profiles(&recent)?;

    let mut correlation_histograms = Vec::with_capacity(2);
    for (feed, set) in [(Feed::Trending, &trending_profiles), (Feed::Recent, &recent_profiles)] {
        let pairs = cohorts::MetricPair::ALL
            .into_iter()
            .map(|pair| {
                Ok(PairHistogram {
                    pair,
                    histogram: correlation_histogram(set, pair, config.histogram_bin_width)?,
                })
            })
            .collect::<Result<Vec<_>, CohortError>>()?;
        correlation_histograms.push(FeedHistograms {
            feed,
            pairs,
            pooled: pooled_correlation_histogram(set, config.histogram_bin_width)?,
        });
    }

    let totals: Vec<(String, f64)> = trending
        .iter()
        .map(|v| (v.video_id.clone(), v.views.final_value()))
        .collect();
    let t_cohorts = quintile_split(&totals)?;
    let candidates: Vec<RecentCandidate<f64>> = recent
        .iter()
        .zip(recent_profiles)
        .map(|(v, profile)| RecentCandidate {
            profile,
            total_views: v.views.final_value(),
        })
        .collect();
    let r_cohorts = select_top_recent(&candidates, config.top_fraction)?;

    let by_id: BTreeMap<&str, &VideoSeries<f64>> = videos.iter().map(|v| (v.video_id.as_str(), v)).collect();
    let resolve = |c: &cohorts::Cohort| -> Vec<&crate::timeseries::AttentionSeries<f64>> {
        c.member_ids.iter().map(|id| by_id[id.as_str()].metric(config.metric)).collect()
    };
    let r5 = r_cohorts
        .iter()
        .find(|c| c.label == CohortLabel::R5)
        .expect("R5 always produced");
    let analysed: Vec<&cohorts::Cohort> = std::iter::once(r5).chain(t_cohorts.iter()).collect();
    let member_series: Vec<Vec<&crate::timeseries::AttentionSeries<f64>>> =
        analysed.iter().map(|c| resolve(c)).collect();
    let cohort_series: Vec<CohortSeries<'_, f64>> = analysed
        .iter()
        .zip(&member_series)
        .map(|(c, m)| CohortSeries {
            label: c.label,
            members: m.as_slice(),
        })
        .collect();

    let entropy_curves = cohort_series
        .iter()
        .map(|c| analysis::entropy_curve(c, &binning, config.entropy_mode))
        .collect::<Result<Vec<_>, _>>()?;
    let entropy_summary = analysis::entropy_summary(&entropy_curves)?;
    let (divergence_curves, divergence_matrix) =
        analysis::divergence_curves_and_matrix(&cohort_series, &binning, config.divergence_mode)?;
    let lagged_curves = cohort_series
        .iter()
        .map(|c| analysis::lagged_divergence_curve(c, &binning, config.divergence_mode))
        .collect::<Result<Vec<_>, _>>()?;

    let mut all_cohorts = t_cohorts.clone();
    all_cohorts.extend(r_cohorts);

    Ok(Report {
        config: config.clone(),
        summary: RunSummary {
            snapshots: 0,
            videos_seen: videos.len(),
            eligible_trending: trending.len(),
            eligible_recent: recent.len(),
        },
        cohorts: all_cohorts,
        correlation_histograms,
        entropy_curves,
        entropy_summary,
        divergence_curves,
        lagged_curves,
        divergence_matrix,
    })
}
