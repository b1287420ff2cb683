//! Snapshot CSV reading and writing.
//!
//! The format is shared by the collector log and the synthetic generator:
//!
//! ```text
//! video_id,feed,observed_at,views,likes,comments
//! trend-00001,trending,1348185600,1520,12,3
//! ```

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::timeseries::Snapshot;

pub const SNAPSHOT_HEADER: [&str; 6] = ["video_id", "feed", "observed_at", "views", "likes", "comments"];

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Open {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("unexpected header {found:?}, expected {expected:?}")]
    Header { found: String, expected: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn malformed(line: u64, message: impl Into<String>) -> IoError {
    IoError::Malformed {
        line,
        message: message.into(),
    }
}

/// Parses snapshot rows. Errors carry the 1-based line number of the
/// offending row.
pub fn read_snapshots<R: Read>(reader: R) -> Result<Vec<Snapshot>, IoError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if !headers.is_empty() && headers.iter().map(str::trim).ne(SNAPSHOT_HEADER) {
        return Err(IoError::Header {
            found: headers.iter().collect::<Vec<_>>().join(","),
            expected: SNAPSHOT_HEADER.join(","),
        });
    }
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            malformed(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != SNAPSHOT_HEADER.len() {
            return Err(malformed(line, format!("expected 6 fields, found {}", record.len())));
        }
        let field = |i: usize| record[i].trim();
        let count = |i: usize| {
            field(i)
                .parse::<u64>()
                .map_err(|_| malformed(line, format!("{} must be a non-negative integer, got {:?}", SNAPSHOT_HEADER[i], field(i))))
        };
        let video_id = field(0);
        if video_id.is_empty() {
            return Err(malformed(line, "empty video_id"));
        }
        let feed = field(1).parse().map_err(|e: String| malformed(line, e))?;
        let observed_at: i64 = field(2)
            .parse()
            .map_err(|_| malformed(line, format!("observed_at must be an integer, got {:?}", field(2))))?;
        if observed_at <= 0 {
            return Err(malformed(line, "observed_at must be > 0"));
        }
        out.push(Snapshot {
            video_id: video_id.to_string(),
            feed,
            observed_at,
            views: count(3)?,
            likes: count(4)?,
            comments: count(5)?,
        });
    }
    Ok(out)
}

pub fn read_snapshots_file(path: &Path) -> Result<Vec<Snapshot>, IoError> {
    let file = File::open(path).map_err(|source| IoError::Open {
        path: path.display().to_string(),
        source,
    })?;
    read_snapshots(BufReader::new(file))
}

pub fn write_header<W: Write>(w: &mut csv::Writer<W>) -> csv::Result<()> {
    w.write_record(SNAPSHOT_HEADER)
}

pub fn write_snapshot_row<W: Write>(w: &mut csv::Writer<W>, s: &Snapshot) -> csv::Result<()> {
    w.write_record([
        s.video_id.as_str(),
        s.feed.as_str(),
        &s.observed_at.to_string(),
        &s.views.to_string(),
        &s.likes.to_string(),
        &s.comments.to_string(),
    ])
}

pub fn write_snapshots<W: Write>(writer: W, snapshots: &[Snapshot]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(writer);
    write_header(&mut w)?;
    for s in snapshots {
        write_snapshot_row(&mut w, s)?;
    }
    w.flush()?;
    Ok(())
}
