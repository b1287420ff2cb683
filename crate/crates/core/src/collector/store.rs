//! Append-only on-disk log: `snapshots.csv` plus `cycles.jsonl`, with the
//! schedule parameters pinned in `schedule.json`.
//!
//! A cycle is committed once its marker line is written. Snapshot rows are
//! appended before the marker, so a crash in between leaves rows newer than
//! the last marker; [`SnapshotStore::open`] drops that uncommitted tail.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::{read_snapshots_file, write_header, write_snapshot_row, IoError};
use crate::timeseries::{Feed, Snapshot};

pub const SNAPSHOT_FILE: &str = "snapshots.csv";
pub const MARKER_FILE: &str = "cycles.jsonl";
pub const SCHEDULE_FILE: &str = "schedule.json";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("store {path} line {line}: {message}")]
    Corrupt { path: PathBuf, line: usize, message: String },
    #[error(transparent)]
    Snapshots(#[from] IoError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewVideo {
    pub video_id: String,
    pub feed: Feed,
}

/// One line of `cycles.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleMarker {
    pub cycle: u64,
    pub scheduled_at: i64,
    /// False when the cycle collected nothing (source down or window missed).
    pub completed: bool,
    #[serde(default)]
    pub new_videos: Vec<NewVideo>,
    #[serde(default)]
    pub gone: Vec<String>,
    #[serde(default)]
    pub completed_videos: Vec<String>,
    #[serde(default)]
    pub missed: Vec<String>,
    #[serde(default)]
    pub snapshots: usize,
    #[serde(default)]
    pub overlap: BTreeMap<Feed, usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CycleMarker {
    pub fn incomplete(cycle: u64, scheduled_at: i64, error: impl Into<String>) -> Self {
        Self {
            cycle,
            scheduled_at,
            completed: false,
            new_videos: Vec::new(),
            gone: Vec::new(),
            completed_videos: Vec::new(),
            missed: Vec::new(),
            snapshots: 0,
            overlap: BTreeMap::new(),
            error: Some(error.into()),
        }
    }
}

/// Schedule parameters fixed when the store is first created.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredSchedule {
    pub start_time: i64,
    pub interval_seconds: u64,
}

#[derive(Debug)]
pub struct SnapshotStore {
    dir: PathBuf,
    markers: Vec<CycleMarker>,
    snapshot_rows: usize,
}

impl SnapshotStore {
    /// Opens or creates a store, verifying it is writable and discarding any
    /// uncommitted snapshot rows.
    pub fn open(dir: &Path) -> Result<Self, StoreError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let snap_path = dir.join(SNAPSHOT_FILE);
        let marker_path = dir.join(MARKER_FILE);

        let markers = read_markers(&marker_path)?;
        OpenOptions::new()
            .create(true)
            .append(true)
            .open(&marker_path)
            .map_err(io_err(&marker_path))?;

        let existing = if snap_path.exists() && fs::metadata(&snap_path).map_err(io_err(&snap_path))?.len() > 0 {
            read_snapshots_file(&snap_path)?
        } else {
            Vec::new()
        };
        let committed_until = markers.last().map(|m| m.scheduled_at);
        let committed: Vec<Snapshot> = existing
            .iter()
            .filter(|s| committed_until.is_some_and(|t| s.observed_at <= t))
            .cloned()
            .collect();
        if committed.len() != existing.len() || existing.is_empty() {
            if committed.len() != existing.len() {
                log::warn!(
                    "dropping {} uncommitted snapshot rows from {}",
                    existing.len() - committed.len(),
                    snap_path.display()
                );
            }
            rewrite_snapshots(&snap_path, &committed)?;
        } else {
            OpenOptions::new().append(true).open(&snap_path).map_err(io_err(&snap_path))?;
        }

        Ok(Self {
            dir: dir.to_path_buf(),
            markers,
            snapshot_rows: committed.len(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn snapshot_path(&self) -> PathBuf {
        self.dir.join(SNAPSHOT_FILE)
    }

    pub fn markers(&self) -> &[CycleMarker] {
        &self.markers
    }

    pub fn last_marker(&self) -> Option<&CycleMarker> {
        self.markers.last()
    }

    pub fn snapshot_rows(&self) -> usize {
        self.snapshot_rows
    }

    pub fn load_schedule(&self) -> Result<Option<StoredSchedule>, StoreError> {
        let path = self.dir.join(SCHEDULE_FILE);
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        serde_json::from_str(&text).map(Some).map_err(|e| StoreError::Corrupt {
            path,
            line: 1,
            message: e.to_string(),
        })
    }

    pub fn save_schedule(&self, schedule: StoredSchedule) -> Result<(), StoreError> {
        let path = self.dir.join(SCHEDULE_FILE);
        let text = serde_json::to_string(&schedule).expect("schedule serializes");
        fs::write(&path, text + "\n").map_err(io_err(&path))
    }

    /// Appends one cycle: its snapshot rows, then its marker.
    pub fn commit_cycle(&mut self, snapshots: &[Snapshot], marker: &CycleMarker) -> Result<(), StoreError> {
        if let Some(last) = self.markers.last() {
            assert!(
                marker.cycle > last.cycle && marker.scheduled_at > last.scheduled_at,
                "cycle markers must strictly increase"
            );
        }
        let snap_path = self.snapshot_path();
        if !snapshots.is_empty() {
            let file = OpenOptions::new().append(true).open(&snap_path).map_err(io_err(&snap_path))?;
            let mut w = csv::Writer::from_writer(file);
            for s in snapshots {
                write_snapshot_row(&mut w, s)?;
            }
            w.flush().map_err(io_err(&snap_path))?;
            w.get_ref().sync_data().map_err(io_err(&snap_path))?;
        }
        let marker_path = self.dir.join(MARKER_FILE);
        let mut f = OpenOptions::new().append(true).open(&marker_path).map_err(io_err(&marker_path))?;
        let mut line = serde_json::to_string(marker).expect("marker serializes");
        line.push('\n');
        f.write_all(line.as_bytes()).map_err(io_err(&marker_path))?;
        f.sync_data().map_err(io_err(&marker_path))?;
        self.markers.push(marker.clone());
        self.snapshot_rows += snapshots.len();
        Ok(())
    }

    pub fn read_snapshots(&self) -> Result<Vec<Snapshot>, StoreError> {
        Ok(read_snapshots_file(&self.snapshot_path())?)
    }
}

fn read_markers(path: &Path) -> Result<Vec<CycleMarker>, StoreError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let file = File::open(path).map_err(io_err(path))?;
    let mut markers: Vec<CycleMarker> = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let marker: CycleMarker = serde_json::from_str(&line).map_err(|e| StoreError::Corrupt {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        if markers.last().is_some_and(|m| m.cycle >= marker.cycle || m.scheduled_at >= marker.scheduled_at) {
            return Err(StoreError::Corrupt {
                path: path.to_path_buf(),
                line: i + 1,
                message: "cycle markers out of order".into(),
            });
        }
        markers.push(marker);
    }
    Ok(markers)
}

fn rewrite_snapshots(path: &Path, snapshots: &[Snapshot]) -> Result<(), StoreError> {
    let tmp = path.with_extension("csv.tmp");
    {
        let file = File::create(&tmp).map_err(io_err(&tmp))?;
        let mut w = csv::Writer::from_writer(file);
        write_header(&mut w)?;
        for s in snapshots {
            write_snapshot_row(&mut w, s)?;
        }
        w.flush().map_err(io_err(&tmp))?;
        w.get_ref().sync_data().map_err(io_err(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(io_err(path))
}
