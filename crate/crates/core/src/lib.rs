//! Information-theoretic analysis of attention time series.
//!
//! Periodic counter snapshots (views, likes, comments) for media items are
//! aligned onto a fixed six-hour grid, normalized per item, grouped into
//! cohorts, and summarized per period as histograms. Over those histograms
//! the crate computes Shannon entropy curves, symmetric normalized divergence
//! between cohorts, and time-lagged divergence within a cohort.
//!
//! The numeric core is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which is what the pipeline and report use.

pub mod analysis;
pub mod cohorts;
pub mod collector;
pub mod infotheory;
pub mod io;
pub mod pipeline;
pub mod report;
pub mod scalar;
pub mod synthgen;
pub mod timeseries;

pub use scalar::Real;

pub type AttentionSeries = timeseries::AttentionSeries<f64>;
pub type VideoSeries = timeseries::VideoSeries<f64>;
pub type ProbabilityDistribution = infotheory::ProbabilityDistribution<f64>;
pub type BinningConfig = infotheory::BinningConfig<f64>;
pub type EntropyValue = infotheory::EntropyValue<f64>;
pub type DivergenceValue = infotheory::DivergenceValue<f64>;
pub type CorrelationProfile = cohorts::CorrelationProfile<f64>;
pub type Histogram = cohorts::Histogram<f64>;
pub type EntropyCurve = analysis::EntropyCurve<f64>;
pub type EntropySummary = analysis::EntropySummary<f64>;
pub type DivergenceCurve = analysis::DivergenceCurve<f64>;
pub type DivergenceMatrix = analysis::DivergenceMatrix<f64>;

pub use cohorts::{Cohort, CohortLabel, MetricPair};
pub use timeseries::{Feed, Grid, Metric, NormalizationMode, Snapshot};
