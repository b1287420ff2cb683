use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::synthgen::SyntheticCorpus;
use crate::timeseries::Feed;

/// Most ids a feed returns per request.
pub const MAX_FEED_SIZE: usize = 150;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SourceError {
    #[error("source unreachable: {0}")]
    Unreachable(String),
    #[error("fetch failed: {0}")]
    Fetch(String),
    #[error("invalid source script: {0}")]
    Script(String),
}

/// Counter values for one video, or notice that it was taken down.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatsResponse {
    Counters { views: u64, likes: u64, comments: u64 },
    Gone,
}

/// Where feed listings and per-video counters come from.
///
/// `now` is the scheduled time of the poll cycle asking; live sources may
/// ignore it.
pub trait StatsSource {
    fn list_feed(&mut self, feed: Feed, now: i64) -> Result<Vec<String>, SourceError>;
    fn get_stats(&mut self, video_id: &str, now: i64) -> Result<StatsResponse, SourceError>;
}

fn default_listed_cycles() -> u64 {
    2
}

fn default_feed_size() -> usize {
    MAX_FEED_SIZE
}

/// One scripted video. Counter vectors are indexed by cycles since
/// `appear_cycle`; past the end the last value repeats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockVideo {
    pub video_id: String,
    pub feed: Feed,
    pub appear_cycle: u64,
    /// Consecutive cycles during which the video is listed in its feed.
    #[serde(default = "default_listed_cycles")]
    pub listed_cycles: u64,
    pub views: Vec<u64>,
    #[serde(default)]
    pub likes: Vec<u64>,
    #[serde(default)]
    pub comments: Vec<u64>,
    #[serde(default)]
    pub gone_at_cycle: Option<u64>,
    /// Cycles at which fetching this video fails transiently.
    #[serde(default)]
    pub fail_cycles: Vec<u64>,
}

/// Deterministic script driving [`MockSource`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockScript {
    pub start_time: i64,
    pub interval_seconds: u64,
    #[serde(default = "default_feed_size")]
    pub feed_size: usize,
    /// Cycles during which the whole source is unreachable.
    #[serde(default)]
    pub outages: Vec<u64>,
    pub videos: Vec<MockVideo>,
}

impl MockScript {
    pub fn load(path: &Path) -> Result<Self, SourceError> {
        let text = fs::read_to_string(path).map_err(|e| SourceError::Script(format!("{}: {e}", path.display())))?;
        let script: Self = serde_json::from_str(&text).map_err(|e| SourceError::Script(e.to_string()))?;
        script.validate()?;
        Ok(script)
    }

    pub fn validate(&self) -> Result<(), SourceError> {
        if self.interval_seconds == 0 {
            return Err(SourceError::Script("interval_seconds must be > 0".into()));
        }
        let mut seen = BTreeSet::new();
        for v in &self.videos {
            if !seen.insert(v.video_id.as_str()) {
                return Err(SourceError::Script(format!("duplicate video id {}", v.video_id)));
            }
            if v.views.is_empty() {
                return Err(SourceError::Script(format!("video {} has no views", v.video_id)));
            }
        }
        Ok(())
    }

    /// Script replaying a synthetic corpus: each video appears at the cycle
    /// of its first snapshot and reports its snapshots in order.
    pub fn from_corpus(corpus: &SyntheticCorpus) -> Self {
        let start = corpus.config.start_time;
        let interval = corpus.config.period_seconds;
        let videos = corpus
            .videos
            .iter()
            .filter_map(|v| {
                let first = v.snapshots.first()?;
                let appear_cycle = ((first.observed_at - start) as u64) / interval;
                Some(MockVideo {
                    video_id: first.video_id.clone(),
                    feed: first.feed,
                    appear_cycle,
                    listed_cycles: default_listed_cycles(),
                    views: v.snapshots.iter().map(|s| s.views).collect(),
                    likes: v.snapshots.iter().map(|s| s.likes).collect(),
                    comments: v.snapshots.iter().map(|s| s.comments).collect(),
                    gone_at_cycle: v.taken_down_after.map(|k| appear_cycle + k as u64),
                    fail_cycles: Vec::new(),
                })
            })
            .collect();
        Self {
            start_time: start,
            interval_seconds: interval,
            feed_size: MAX_FEED_SIZE,
            outages: Vec::new(),
            videos,
        }
    }
}

/// Scripted, fully deterministic source.
#[derive(Debug, Clone)]
pub struct MockSource {
    script: MockScript,
}

impl MockSource {
    pub fn new(script: MockScript) -> Result<Self, SourceError> {
        script.validate()?;
        Ok(Self { script })
    }

    pub fn script(&self) -> &MockScript {
        &self.script
    }

    fn cycle(&self, now: i64) -> Option<u64> {
        (now >= self.script.start_time).then(|| ((now - self.script.start_time) as u64) / self.script.interval_seconds)
    }

    fn check_reachable(&self, cycle: u64) -> Result<(), SourceError> {
        if self.script.outages.contains(&cycle) {
            Err(SourceError::Unreachable(format!("scripted outage at cycle {cycle}")))
        } else {
            Ok(())
        }
    }
}

fn at(values: &[u64], k: u64) -> u64 {
    values
        .get(k as usize)
        .or(values.last())
        .copied()
        .unwrap_or(0)
}

impl StatsSource for MockSource {
    fn list_feed(&mut self, feed: Feed, now: i64) -> Result<Vec<String>, SourceError> {
        let Some(cycle) = self.cycle(now) else {
            return Ok(Vec::new());
        };
        self.check_reachable(cycle)?;
        let mut listed: Vec<&MockVideo> = self
            .script
            .videos
            .iter()
            .filter(|v| v.feed == feed && v.appear_cycle <= cycle && cycle < v.appear_cycle + v.listed_cycles)
            .filter(|v| v.gone_at_cycle.is_none_or(|g| cycle < g))
            .collect();
        // newest first, as a feed would present them
        listed.sort_by(|a, b| b.appear_cycle.cmp(&a.appear_cycle).then_with(|| a.video_id.cmp(&b.video_id)));
        Ok(listed
            .into_iter()
            .take(self.script.feed_size.min(MAX_FEED_SIZE))
            .map(|v| v.video_id.clone())
            .collect())
    }

    fn get_stats(&mut self, video_id: &str, now: i64) -> Result<StatsResponse, SourceError> {
        let cycle = self
            .cycle(now)
            .ok_or_else(|| SourceError::Fetch("poll before script start".into()))?;
        self.check_reachable(cycle)?;
        let v = self
            .script
            .videos
            .iter()
            .find(|v| v.video_id == video_id)
            .ok_or_else(|| SourceError::Fetch(format!("unknown video {video_id}")))?;
        if v.gone_at_cycle.is_some_and(|g| cycle >= g) {
            return Ok(StatsResponse::Gone);
        }
        if v.fail_cycles.contains(&cycle) {
            return Err(SourceError::Fetch(format!("scripted failure for {video_id} at cycle {cycle}")));
        }
        let k = cycle.saturating_sub(v.appear_cycle);
        Ok(StatsResponse::Counters {
            views: at(&v.views, k),
            likes: at(&v.likes, k),
            comments: at(&v.comments, k),
        })
    }
}
