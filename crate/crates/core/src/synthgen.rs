//! Seeded synthetic corpora of trending-like and recent-like videos.
//!
//! Each video gets a total view count drawn from a log-normal, and a share
//! trajectory drawn from a gamma-shaped envelope (rise over the first day,
//! decay afterwards). Trending videos are tiered by total views and higher
//! tiers decay more slowly. `early_volatility` perturbs both the envelope
//! tempo and the individual increments, with the increment noise
//! concentrated in the first two days; at zero every video in a tier shares
//! one trajectory.
//!
//! Likes and comments follow a mixture of the view trajectory (weight
//! `metric_coupling`) and an independent one. Most recent videos are
//! uncoupled and carry few or no likes and comments.
//!
//! Per-video randomness comes from a sub-seed derived from the global seed
//! and the video index, so the output is a pure function of the config.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, LogNormal, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::timeseries::{Feed, SeriesError, Snapshot, VideoSeries, DEFAULT_NUM_PERIODS, DEFAULT_PERIOD_SECONDS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeneratorError {
    #[error("invalid generator config: {field} {reason}")]
    InvalidConfig { field: &'static str, reason: &'static str },
    #[error(transparent)]
    Series(#[from] SeriesError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub num_trending: usize,
    pub num_recent: usize,
    pub num_periods: usize,
    pub period_seconds: u64,
    /// Epoch seconds of the first poll.
    pub start_time: i64,
    /// First-seen times are spread over this many periods.
    pub arrival_window_periods: usize,
    pub trending_median_views: f64,
    pub trending_sigma: f64,
    pub recent_median_views: f64,
    pub recent_sigma: f64,
    /// Randomness of the share trajectories, in `[0, 1]`.
    pub early_volatility: f64,
    /// Probability that a video gets one late spike.
    pub late_spike_rate: f64,
    pub spike_factor: f64,
    /// Weight of the view trajectory in the like/comment trajectories of
    /// coupled videos, in `[0, 1]`.
    pub metric_coupling: f64,
    /// Fraction of recent videos whose likes and comments track views.
    pub coupled_recent_fraction: f64,
    /// Probability that an uncoupled recent video receives any likes.
    pub recent_like_rate: f64,
    /// Probability that an uncoupled recent video receives any comments.
    pub recent_comment_rate: f64,
    /// Probability that a video is taken down before its window ends.
    pub takedown_rate: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            num_trending: 500,
            num_recent: 500,
            num_periods: DEFAULT_NUM_PERIODS,
            period_seconds: DEFAULT_PERIOD_SECONDS,
            // 2012-09-21T00:00:00Z
            start_time: 1_348_185_600,
            arrival_window_periods: 240,
            // median / mean pairs: 117,398 / 1,134,000 trending, 212 / 692.13 recent
            trending_median_views: 117_398.0,
            trending_sigma: 2.13,
            recent_median_views: 212.0,
            recent_sigma: 1.54,
            early_volatility: 0.5,
            late_spike_rate: 0.05,
            spike_factor: 4.0,
            metric_coupling: 0.95,
            coupled_recent_fraction: 0.2,
            recent_like_rate: 0.05,
            recent_comment_rate: 0.1,
            takedown_rate: 0.0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), GeneratorError> {
        let bad = |field, reason| Err(GeneratorError::InvalidConfig { field, reason });
        if self.num_trending == 0 {
            return bad("num_trending", "must be > 0");
        }
        if self.num_recent == 0 {
            return bad("num_recent", "must be > 0");
        }
        if self.num_periods < 8 {
            return bad("num_periods", "must be >= 8");
        }
        if self.period_seconds == 0 {
            return bad("period_seconds", "must be > 0");
        }
        if self.start_time <= 0 {
            return bad("start_time", "must be > 0");
        }
        if self.arrival_window_periods == 0 {
            return bad("arrival_window_periods", "must be > 0");
        }
        for (field, v) in [
            ("trending_median_views", self.trending_median_views),
            ("recent_median_views", self.recent_median_views),
            ("spike_factor", self.spike_factor),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(field, "must be positive");
            }
        }
        for (field, v) in [("trending_sigma", self.trending_sigma), ("recent_sigma", self.recent_sigma)] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(field, "must be non-negative");
            }
        }
        for (field, v) in [
            ("early_volatility", self.early_volatility),
            ("late_spike_rate", self.late_spike_rate),
            ("metric_coupling", self.metric_coupling),
            ("coupled_recent_fraction", self.coupled_recent_fraction),
            ("recent_like_rate", self.recent_like_rate),
            ("recent_comment_rate", self.recent_comment_rate),
            ("takedown_rate", self.takedown_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(field, "must be in [0, 1]");
            }
        }
        Ok(())
    }
}

/// Ground-truth group a synthetic video was generated for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntendedTier {
    /// Trending quintile by total views, 1 (lowest) to 5.
    Trending(u8),
    RecentCoupled,
    RecentUncoupled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticVideo {
    pub tier: IntendedTier,
    pub spiked: bool,
    /// Last observed slot + 1 when the video was taken down early.
    pub taken_down_after: Option<usize>,
    pub snapshots: Vec<Snapshot>,
    pub series: VideoSeries<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub config: GeneratorConfig,
    pub videos: Vec<SyntheticVideo>,
}

impl SyntheticCorpus {
    /// All snapshots ordered by time, then video id.
    pub fn snapshots(&self) -> Vec<Snapshot> {
        let mut all: Vec<Snapshot> = self.videos.iter().flat_map(|v| v.snapshots.iter().cloned()).collect();
        all.sort_by(|a, b| a.observed_at.cmp(&b.observed_at).then_with(|| a.video_id.cmp(&b.video_id)));
        all
    }

    pub fn by_tier(&self, tier: IntendedTier) -> impl Iterator<Item = &SyntheticVideo> {
        self.videos.iter().filter(move |v| v.tier == tier)
    }
}

/// Envelope shape shared by all tiers.
const ENVELOPE_SHAPE: f64 = 1.6;
/// Envelope scale (in periods) of the lowest trending tier and of recent videos.
const BASE_SCALE: f64 = 2.2;
/// Scale multiplier per trending tier step.
const TIER_SCALE_STEP: f64 = 1.25;
/// Periods of full increment noise before it starts to fade.
const EARLY_PERIODS: usize = 8;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn video_rng(seed: u64, stream: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(stream.wrapping_mul(0x1000_0000) ^ index as u64)))
}

fn envelope(num_periods: usize, scale: f64) -> Vec<f64> {
    (0..num_periods)
        .map(|t| {
            let x = t as f64 + 0.5;
            x.powf(ENVELOPE_SHAPE - 1.0) * (-x / scale).exp()
        })
        .collect()
}

fn to_shares(weights: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    weights.iter().map(|w| w / total).collect()
}

fn running(shares: &[f64]) -> Vec<f64> {
    shares
        .iter()
        .scan(0.0, |acc, s| {
            *acc += s;
            Some(*acc)
        })
        .collect()
}

/// Integer cumulative counts following `shares` up to `total`.
fn counts_from_shares(shares: &[f64], total: u64) -> Vec<u64> {
    let cum = running(shares);
    let last = *cum.last().unwrap_or(&1.0);
    let mut out: Vec<u64> = cum.iter().map(|c| ((c / last) * total as f64).round() as u64).collect();
    if let Some(l) = out.last_mut() {
        *l = total;
    }
    for k in 1..out.len() {
        out[k] = out[k].max(out[k - 1]);
    }
    out
}

/// Views already on the counter at first sighting, as a share of the total.
const INITIAL_SHARE: f64 = 0.008;
/// Upper bound on the initial share, so every video starts in the lowest
/// cumulative-share bin.
const MAX_INITIAL_SHARE: f64 = 0.025;

/// Per-period view shares: slot 0 is the count at first sighting, later
/// slots follow the (noisy) envelope.
fn view_shares(config: &GeneratorConfig, scale: f64, rng: &mut ChaCha8Rng, spike: Option<usize>) -> Vec<f64> {
    let vol = config.early_volatility;
    let normal = |rng: &mut ChaCha8Rng, sigma: f64| -> f64 {
        if sigma > 0.0 {
            Normal::new(0.0, sigma).expect("finite sigma").sample(rng)
        } else {
            0.0
        }
    };
    let tempo = normal(rng, 0.35 * vol).exp();
    let initial = (INITIAL_SHARE * normal(rng, 0.5 * vol).exp()).min(MAX_INITIAL_SHARE);
    let mut weights = envelope(config.num_periods - 1, scale * tempo);
    for (t, w) in weights.iter_mut().enumerate() {
        let fade = if t < EARLY_PERIODS {
            1.0
        } else {
            (-((t - EARLY_PERIODS) as f64) / 4.0).exp()
        };
        *w *= normal(rng, vol * fade).exp();
    }
    if let Some(t) = spike {
        weights[t - 1] *= config.spike_factor;
    }
    let mut shares = vec![initial];
    shares.extend(to_shares(&weights).into_iter().map(|s| s * (1.0 - initial)));
    shares
}

/// Mixture of the view trajectory and an independent flat-ish trajectory.
fn coupled_shares(view_shares: &[f64], coupling: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let gamma = Gamma::new(2.0, 1.0).expect("valid gamma");
    let indep = to_shares(&view_shares.iter().map(|_| gamma.sample(rng)).collect::<Vec<_>>());
    view_shares
        .iter()
        .zip(&indep)
        .map(|(v, i)| coupling * v + (1.0 - coupling) * i)
        .collect()
}

/// A handful of events at random periods.
fn sparse_counts(num_periods: usize, events: u64, rng: &mut ChaCha8Rng) -> Vec<u64> {
    let mut per_period = vec![0u64; num_periods];
    for _ in 0..events {
        per_period[rng.random_range(0..num_periods)] += 1;
    }
    running_u64(&per_period)
}

fn running_u64(values: &[u64]) -> Vec<u64> {
    values
        .iter()
        .scan(0u64, |acc, v| {
            *acc += v;
            Some(*acc)
        })
        .collect()
}

fn lognormal_total(median: f64, sigma: f64, rng: &mut ChaCha8Rng) -> u64 {
    let draw = if sigma > 0.0 {
        LogNormal::new(median.ln(), sigma).expect("finite params").sample(rng)
    } else {
        median
    };
    draw.round().max(1.0) as u64
}

struct Draft {
    feed: Feed,
    index: usize,
    total_views: u64,
    coupled: bool,
    rng: ChaCha8Rng,
}

pub fn generate(config: &GeneratorConfig) -> Result<SyntheticCorpus, GeneratorError> {
    config.validate()?;
    let n = config.num_periods;

    let mut drafts: Vec<Draft> = Vec::with_capacity(config.num_trending + config.num_recent);
    for i in 0..config.num_trending {
        let mut rng = video_rng(config.seed, 1, i);
        let total_views = lognormal_total(config.trending_median_views, config.trending_sigma, &mut rng);
        drafts.push(Draft { feed: Feed::Trending, index: i, total_views, coupled: true, rng });
    }
    for i in 0..config.num_recent {
        let mut rng = video_rng(config.seed, 2, i);
        let total_views = lognormal_total(config.recent_median_views, config.recent_sigma, &mut rng);
        let coupled = rng.random_bool(config.coupled_recent_fraction);
        drafts.push(Draft { feed: Feed::Recent, index: i, total_views, coupled, rng });
    }

    // trending tiers by ascending total views, ties by index
    let mut order: Vec<usize> = (0..config.num_trending).collect();
    order.sort_by_key(|&i| (drafts[i].total_views, i));
    let mut tier_of = vec![1u8; config.num_trending];
    for (rank, &i) in order.iter().enumerate() {
        tier_of[i] = (rank * 5 / config.num_trending) as u8 + 1;
    }

    let mut videos = Vec::with_capacity(drafts.len());
    for (pos, mut d) in drafts.into_iter().enumerate() {
        let tier = match d.feed {
            Feed::Trending => IntendedTier::Trending(tier_of[pos]),
            Feed::Recent if d.coupled => IntendedTier::RecentCoupled,
            Feed::Recent => IntendedTier::RecentUncoupled,
        };
        let scale = match tier {
            IntendedTier::Trending(q) => BASE_SCALE * TIER_SCALE_STEP.powi(q as i32 - 1),
            _ => BASE_SCALE,
        };
        let rng = &mut d.rng;
        let spike = (rng.random_bool(config.late_spike_rate)).then(|| rng.random_range(EARLY_PERIODS + 4..n));
        let shares = view_shares(config, scale, rng, spike);
        let views = counts_from_shares(&shares, d.total_views);

        let (likes, comments) = if d.coupled {
            let (like_ratio, comment_ratio, floor) = match d.feed {
                Feed::Trending => (0.004, 0.0025, 1),
                Feed::Recent => (0.03, 0.02, 3),
            };
            let jitter = LogNormal::new(0.0, 0.5).expect("finite sigma");
            let like_total = ((d.total_views as f64 * like_ratio * jitter.sample(rng)).round() as u64).max(floor);
            let comment_total =
                ((d.total_views as f64 * comment_ratio * jitter.sample(rng)).round() as u64).max(floor);
            let like_shares = coupled_shares(&shares, config.metric_coupling, rng);
            let comment_shares = coupled_shares(&shares, config.metric_coupling, rng);
            (
                counts_from_shares(&like_shares, like_total),
                counts_from_shares(&comment_shares, comment_total),
            )
        } else {
            let like_events = if rng.random_bool(config.recent_like_rate) { rng.random_range(1..=3) } else { 0 };
            let comment_events =
                if rng.random_bool(config.recent_comment_rate) { rng.random_range(1..=3) } else { 0 };
            (sparse_counts(n, like_events, rng), sparse_counts(n, comment_events, rng))
        };

        let taken_down_after = rng
            .random_bool(config.takedown_rate)
            .then(|| rng.random_range(EARLY_PERIODS..n));
        let observed = taken_down_after.unwrap_or(n);

        let video_id = match d.feed {
            Feed::Trending => format!("trend-{:05}", d.index),
            Feed::Recent => format!("recent-{:05}", d.index),
        };
        let first_seen = config.start_time
            + ((d.index % config.arrival_window_periods) as u64 * config.period_seconds) as i64;
        let snapshots: Vec<Snapshot> = (0..observed)
            .map(|k| Snapshot {
                video_id: video_id.clone(),
                feed: d.feed,
                observed_at: first_seen + (k as u64 * config.period_seconds) as i64,
                views: views[k],
                likes: likes[k],
                comments: comments[k],
            })
            .collect();
        let series = VideoSeries::from_snapshots(&snapshots, config.period_seconds, n)?;
        videos.push(SyntheticVideo {
            tier,
            spiked: spike.is_some(),
            taken_down_after,
            snapshots,
            series,
        });
    }

    Ok(SyntheticCorpus {
        config: config.clone(),
        videos,
    })
}
