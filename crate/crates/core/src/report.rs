//! The analysis report and its on-disk bundle.
//!
//! A bundle directory holds `report.json` plus figure-ready CSV tables that
//! are rendered purely from the report, so re-rendering from `report.json`
//! reproduces them byte for byte.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{DivergenceCurve, DivergenceKind, DivergenceMatrix, EntropyCurve, EntropySummary};
use crate::cohorts::{write_cohort_csv, Cohort, Histogram, MetricPair};
use crate::pipeline::AnalysisConfig;
use crate::timeseries::Feed;

pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub snapshots: usize,
    pub videos_seen: usize,
    pub eligible_trending: usize,
    pub eligible_recent: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairHistogram {
    pub pair: MetricPair,
    pub histogram: Histogram<f64>,
}

/// Correlation histograms for one feed: one per metric pair plus all pairs
/// pooled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedHistograms {
    pub feed: Feed,
    pub pairs: Vec<PairHistogram>,
    pub pooled: Histogram<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: AnalysisConfig,
    pub summary: RunSummary,
    pub cohorts: Vec<Cohort>,
    pub correlation_histograms: Vec<FeedHistograms>,
    pub entropy_curves: Vec<EntropyCurve<f64>>,
    pub entropy_summary: EntropySummary<f64>,
    pub divergence_curves: Vec<DivergenceCurve<f64>>,
    pub lagged_curves: Vec<DivergenceCurve<f64>>,
    pub divergence_matrix: DivergenceMatrix<f64>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl Report {
    pub fn load(path: &Path) -> Result<Self, ReportError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|source| ReportError::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Writes `report.json` and every table into `dir`.
    pub fn write_bundle(&self, dir: &Path) -> Result<(), ReportError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let path = dir.join(REPORT_FILE);
        fs::write(&path, self.to_json()).map_err(io_err(&path))?;
        self.render_tables(dir)
    }

    /// Writes the CSV tables only.
    pub fn render_tables(&self, dir: &Path) -> Result<(), ReportError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        self.write_table(dir, "entropy_curves.csv", |w| self.entropy_curves_csv(w))?;
        self.write_table(dir, "entropy_summary.csv", |w| self.entropy_summary_csv(w))?;
        self.write_table(dir, "divergence_curves.csv", |w| self.divergence_curves_csv(w))?;
        self.write_table(dir, "divergence_matrix.csv", |w| self.divergence_matrix_csv(w))?;
        for h in &self.correlation_histograms {
            let name = format!("correlation_hist_{}.csv", h.feed);
            self.write_table(dir, &name, |w| correlation_hist_csv(h, w))?;
        }
        self.write_table(dir, "cohorts.csv", |w| write_cohort_csv(&self.cohorts, w))?;
        self.write_table(dir, "run_config.csv", |w| self.config_csv(w))?;
        Ok(())
    }

    fn write_table(
        &self,
        dir: &Path,
        name: &str,
        body: impl FnOnce(&mut BufWriter<File>) -> csv::Result<()>,
    ) -> Result<(), ReportError> {
        let path = dir.join(name);
        let file = File::create(&path).map_err(io_err(&path))?;
        let mut w = BufWriter::new(file);
        body(&mut w)?;
        w.flush().map_err(io_err(&path))?;
        Ok(())
    }

    fn entropy_curves_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["cohort", "metric", "period", "entropy", "entropy_nats"])?;
        for c in &self.entropy_curves {
            for (t, (e, n)) in c.entropy.iter().zip(&c.entropy_nats).enumerate() {
                w.write_record([c.cohort.as_str(), c.metric.as_str(), &t.to_string(), &e.to_string(), &n.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    fn entropy_summary_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["period", "mean", "variance"])?;
        let s = &self.entropy_summary;
        for (t, (m, v)) in s.mean.iter().zip(&s.variance).enumerate() {
            w.write_record([t.to_string(), m.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Between-group rows use `period` = t; lagged rows use `period` = t for
    /// the comparison of t - 1 with t.
    fn divergence_curves_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["kind", "cohort_a", "cohort_b", "metric", "period", "delta", "d_ab", "d_ba"])?;
        for c in self.divergence_curves.iter().chain(&self.lagged_curves) {
            let (kind, offset) = match c.kind {
                DivergenceKind::Between => ("between", 0),
                DivergenceKind::Lagged => ("lagged", 1),
            };
            for i in 0..c.delta.len() {
                w.write_record([
                    kind,
                    c.cohort_a.as_str(),
                    c.cohort_b.as_str(),
                    c.metric.as_str(),
                    &(i + offset).to_string(),
                    &c.delta[i].to_string(),
                    &c.d_ab[i].to_string(),
                    &c.d_ba[i].to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    fn divergence_matrix_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let m = &self.divergence_matrix;
        let mut header = vec!["cohort".to_string()];
        header.extend(m.labels.iter().map(|l| l.to_string()));
        w.write_record(&header)?;
        for (label, row) in m.labels.iter().zip(&m.values) {
            let mut rec = vec![label.to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    fn config_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["key", "value"])?;
        let value = serde_json::to_value(&self.config).expect("config serializes");
        if let serde_json::Value::Object(map) = value {
            for (k, v) in map {
                let v = match v {
                    serde_json::Value::String(s) => s,
                    other => other.to_string(),
                };
                w.write_record([k, v])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn correlation_hist_csv<W: Write>(h: &FeedHistograms, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["pair", "bin_lo", "bin_hi", "count", "fraction"])?;
    let rows = h
        .pairs
        .iter()
        .map(|p| (p.pair.as_str(), &p.histogram))
        .chain(std::iter::once(("pooled", &h.pooled)));
    for (name, hist) in rows {
        for k in 0..hist.counts.len() {
            w.write_record([
                name,
                &hist.edges[k].to_string(),
                &hist.edges[k + 1].to_string(),
                &hist.counts[k].to_string(),
                &hist.fractions[k].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
