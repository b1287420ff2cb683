//! Periodic collection of feed listings and per-video counters.
//!
//! Every cycle first polls both feeds for videos not yet tracked, then walks
//! every active video and records a snapshot of its counters. Results go to
//! an append-only [`store::SnapshotStore`]: snapshot rows in CSV and one
//! JSON marker per cycle. The markers carry every registry change, so the
//! registry can be rebuilt by replaying them.

pub mod http;
pub mod schedule;
pub mod source;
pub mod store;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::timeseries::{Feed, Snapshot};

pub use self::http::HttpSource;
pub use self::schedule::{run_schedule, Clock, ScheduleConfig, ScheduleError, ScheduleSummary, VirtualClock, WallClock};
pub use self::source::{MockScript, MockSource, MockVideo, SourceError, StatsResponse, StatsSource, MAX_FEED_SIZE};
pub use self::store::{CycleMarker, NewVideo, SnapshotStore, StoreError};

/// Fourteen days.
pub const DEFAULT_TRACKING_SECONDS: u64 = 14 * 86_400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackingStatus {
    Active,
    Gone,
    Complete,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrackedVideo {
    pub video_id: String,
    pub feed: Feed,
    pub first_seen: i64,
    pub tracking_deadline: i64,
    pub status: TrackingStatus,
}

/// Every video ever tracked, keyed by id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Registry {
    videos: BTreeMap<String, TrackedVideo>,
    tracking_seconds: u64,
}

impl Registry {
    pub fn new(tracking_seconds: u64) -> Self {
        Self {
            videos: BTreeMap::new(),
            tracking_seconds,
        }
    }

    pub fn get(&self, video_id: &str) -> Option<&TrackedVideo> {
        self.videos.get(video_id)
    }

    pub fn contains(&self, video_id: &str) -> bool {
        self.videos.contains_key(video_id)
    }

    pub fn len(&self) -> usize {
        self.videos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.videos.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &TrackedVideo> {
        self.videos.values()
    }

    fn insert(&mut self, video_id: &str, feed: Feed, first_seen: i64) -> TrackedVideo {
        let tracked = TrackedVideo {
            video_id: video_id.to_string(),
            feed,
            first_seen,
            tracking_deadline: first_seen + self.tracking_seconds as i64,
            status: TrackingStatus::Active,
        };
        self.videos.insert(video_id.to_string(), tracked.clone());
        tracked
    }

    fn set_status(&mut self, video_id: &str, status: TrackingStatus) {
        if let Some(v) = self.videos.get_mut(video_id) {
            v.status = status;
        }
    }

    /// Rebuilds the registry from cycle markers.
    pub fn replay<'a>(markers: impl IntoIterator<Item = &'a CycleMarker>, tracking_seconds: u64) -> Self {
        let mut reg = Self::new(tracking_seconds);
        for m in markers {
            for nv in &m.new_videos {
                reg.insert(&nv.video_id, nv.feed, m.scheduled_at);
            }
            for id in &m.gone {
                reg.set_status(id, TrackingStatus::Gone);
            }
            for id in &m.completed_videos {
                reg.set_status(id, TrackingStatus::Complete);
            }
        }
        reg
    }
}

/// Result of polling both feeds once.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PollOutcome {
    pub new_videos: Vec<TrackedVideo>,
    /// Listed ids that were already tracked, per feed. A nonzero count means
    /// consecutive polls overlapped and nothing was missed in between.
    pub overlap: BTreeMap<Feed, usize>,
    /// Ids listed under a feed other than the one they are tracked under.
    pub feed_conflicts: Vec<String>,
}

/// Lists both feeds and starts tracking unseen ids. If either listing fails
/// the registry is left untouched.
pub fn poll_feeds<S: StatsSource + ?Sized>(
    source: &mut S,
    registry: &mut Registry,
    cycle_time: i64,
) -> Result<PollOutcome, SourceError> {
    let mut listings = Vec::with_capacity(2);
    for feed in Feed::ALL {
        let mut ids = source.list_feed(feed, cycle_time)?;
        ids.truncate(MAX_FEED_SIZE);
        listings.push((feed, ids));
    }
    let mut outcome = PollOutcome::default();
    for (feed, ids) in listings {
        let mut overlap = 0;
        for id in ids {
            match registry.get(&id) {
                Some(existing) if existing.feed == feed => overlap += 1,
                Some(_) => outcome.feed_conflicts.push(id),
                None => outcome.new_videos.push(registry.insert(&id, feed, cycle_time)),
            }
        }
        outcome.overlap.insert(feed, overlap);
    }
    Ok(outcome)
}

/// What one pass over the registry produced.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CycleUpdate {
    pub snapshots: Vec<Snapshot>,
    pub gone: Vec<String>,
    pub completed: Vec<String>,
    /// Videos whose fetch failed this cycle; their slot is imputed later.
    pub missed: Vec<String>,
}

impl CycleUpdate {
    pub fn fetched(&self) -> usize {
        self.snapshots.len()
    }
}

/// Fetches counters for every active video still inside its tracking window.
pub fn update_stats<S: StatsSource + ?Sized>(source: &mut S, registry: &mut Registry, cycle_time: i64) -> CycleUpdate {
    let mut update = CycleUpdate::default();
    let active: Vec<TrackedVideo> = registry
        .iter()
        .filter(|v| v.status == TrackingStatus::Active)
        .cloned()
        .collect();
    for video in active {
        if cycle_time >= video.tracking_deadline {
            registry.set_status(&video.video_id, TrackingStatus::Complete);
            update.completed.push(video.video_id);
            continue;
        }
        match source.get_stats(&video.video_id, cycle_time) {
            Ok(StatsResponse::Counters { views, likes, comments }) => update.snapshots.push(Snapshot {
                video_id: video.video_id,
                feed: video.feed,
                observed_at: cycle_time,
                views,
                likes,
                comments,
            }),
            Ok(StatsResponse::Gone) => {
                registry.set_status(&video.video_id, TrackingStatus::Gone);
                update.gone.push(video.video_id);
            }
            Err(e) => {
                log::warn!("fetch for {} failed: {e}", video.video_id);
                update.missed.push(video.video_id);
            }
        }
    }
    update
}
