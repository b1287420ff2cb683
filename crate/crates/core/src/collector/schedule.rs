use std::path::PathBuf;
use std::thread;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use thiserror::Error;

use super::store::{CycleMarker, NewVideo, SnapshotStore, StoreError, StoredSchedule};
use super::{poll_feeds, update_stats, Registry, StatsSource, DEFAULT_TRACKING_SECONDS};

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("invalid schedule config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Source of "now" for the poll loop.
pub trait Clock {
    fn now(&self) -> i64;
    /// Blocks (or jumps) until `t`.
    fn wait_until(&mut self, t: i64);
}

/// Jumps straight to each scheduled time.
#[derive(Debug, Clone, Copy)]
pub struct VirtualClock {
    now: i64,
}

impl VirtualClock {
    pub fn new(now: i64) -> Self {
        Self { now }
    }
}

impl Clock for VirtualClock {
    fn now(&self) -> i64 {
        self.now
    }

    fn wait_until(&mut self, t: i64) {
        self.now = self.now.max(t);
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct WallClock;

impl Clock for WallClock {
    fn now(&self) -> i64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs() as i64)
    }

    fn wait_until(&mut self, t: i64) {
        let now = self.now();
        if t > now {
            thread::sleep(Duration::from_secs((t - now) as u64));
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleConfig {
    pub interval_seconds: u64,
    pub horizon_days: f64,
    pub tracking_seconds: u64,
    pub store_dir: PathBuf,
    /// Time of cycle 0 for a fresh store; ignored when resuming.
    pub start_time: i64,
    /// Stop after this many cycles in this invocation.
    pub max_cycles: Option<u64>,
}

impl ScheduleConfig {
    pub fn new(store_dir: impl Into<PathBuf>, start_time: i64) -> Self {
        Self {
            interval_seconds: crate::timeseries::DEFAULT_PERIOD_SECONDS,
            horizon_days: 14.0,
            tracking_seconds: DEFAULT_TRACKING_SECONDS,
            store_dir: store_dir.into(),
            start_time,
            max_cycles: None,
        }
    }

    pub fn total_cycles(&self) -> u64 {
        ((self.horizon_days * 86_400.0) / self.interval_seconds as f64).ceil().max(1.0) as u64
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScheduleSummary {
    pub cycles_run: u64,
    pub incomplete_cycles: u64,
    pub snapshots_written: usize,
    pub new_videos: usize,
    pub resumed_from: Option<u64>,
}

/// Runs poll cycles until the horizon, resuming after the last marker in the
/// store. Fails before touching the source if the store cannot be opened.
pub fn run_schedule<S: StatsSource + ?Sized, C: Clock>(
    source: &mut S,
    config: &ScheduleConfig,
    clock: &mut C,
) -> Result<ScheduleSummary, ScheduleError> {
    if config.interval_seconds == 0 {
        return Err(ScheduleError::InvalidConfig("interval must be > 0".into()));
    }
    if !(config.horizon_days > 0.0) {
        return Err(ScheduleError::InvalidConfig("horizon must be > 0".into()));
    }
    let mut store = SnapshotStore::open(&config.store_dir)?;
    let schedule = match store.load_schedule()? {
        Some(s) if s.interval_seconds != config.interval_seconds => {
            return Err(ScheduleError::InvalidConfig(format!(
                "store was created with interval {}s, not {}s",
                s.interval_seconds, config.interval_seconds
            )))
        }
        Some(s) => s,
        None => {
            let s = StoredSchedule {
                start_time: config.start_time,
                interval_seconds: config.interval_seconds,
            };
            store.save_schedule(s)?;
            s
        }
    };

    let mut registry = Registry::replay(store.markers(), config.tracking_seconds);
    let first_cycle = store.last_marker().map_or(0, |m| m.cycle + 1);
    let mut summary = ScheduleSummary {
        resumed_from: store.last_marker().map(|m| m.cycle),
        ..Default::default()
    };

    for cycle in first_cycle..config.total_cycles() {
        if config.max_cycles.is_some_and(|max| summary.cycles_run >= max) {
            break;
        }
        let scheduled_at = schedule.start_time + (cycle * schedule.interval_seconds) as i64;
        clock.wait_until(scheduled_at);
        summary.cycles_run += 1;

        if clock.now() >= scheduled_at + schedule.interval_seconds as i64 {
            store.commit_cycle(&[], &CycleMarker::incomplete(cycle, scheduled_at, "poll window missed"))?;
            summary.incomplete_cycles += 1;
            continue;
        }

        let poll = match poll_feeds(source, &mut registry, scheduled_at) {
            Ok(p) => p,
            Err(e) => {
                log::warn!("cycle {cycle} incomplete: {e}");
                store.commit_cycle(&[], &CycleMarker::incomplete(cycle, scheduled_at, e.to_string()))?;
                summary.incomplete_cycles += 1;
                continue;
            }
        };
        for id in &poll.feed_conflicts {
            log::warn!("video {id} listed under a second feed; ignored");
        }
        let update = update_stats(source, &mut registry, scheduled_at);
        let marker = CycleMarker {
            cycle,
            scheduled_at,
            completed: true,
            new_videos: poll
                .new_videos
                .iter()
                .map(|v| NewVideo {
                    video_id: v.video_id.clone(),
                    feed: v.feed,
                })
                .collect(),
            gone: update.gone.clone(),
            completed_videos: update.completed.clone(),
            missed: update.missed.clone(),
            snapshots: update.snapshots.len(),
            overlap: poll.overlap.clone(),
            error: None,
        };
        store.commit_cycle(&update.snapshots, &marker)?;
        log::info!(
            "cycle {cycle}: {} new, {} fetched, {} gone, {} completed, {} missed",
            marker.new_videos.len(),
            update.fetched(),
            update.gone.len(),
            update.completed.len(),
            update.missed.len()
        );
        summary.snapshots_written += update.snapshots.len();
        summary.new_videos += marker.new_videos.len();
    }
    Ok(summary)
}
