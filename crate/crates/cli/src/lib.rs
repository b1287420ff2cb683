//! `attnflow` command line: `collect`, `generate`, `analyze`, `report`.
//!
//! Every command exits 0 on success and prints a single `attnflow: ...`
//! line to stderr on failure.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use attnflow::collector::{
    run_schedule, HttpSource, MockScript, MockSource, ScheduleConfig, StatsSource, VirtualClock, WallClock,
};
use attnflow::io::{read_snapshots_file, write_snapshots};
use attnflow::pipeline::{analyze_snapshots, AnalysisConfig};
use attnflow::report::{Report, REPORT_FILE};
use attnflow::synthgen::{generate, GeneratorConfig, IntendedTier, SyntheticCorpus};
use attnflow::{Metric, NormalizationMode};
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Name of the snapshot table written by `generate` and `collect`.
pub const SNAPSHOT_FILE: &str = "snapshots.csv";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.csv";
pub const GENERATOR_CONFIG_FILE: &str = "generator_config.json";

#[derive(Debug, Parser)]
#[command(name = "attnflow", version, about = "Entropy and divergence analysis of attention time series")]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Poll a stats source on a fixed schedule into an append-only store.
    Collect(CollectArgs),
    /// Write a seeded synthetic snapshot corpus.
    Generate(GenerateArgs),
    /// Build cohorts, curves and matrices from a snapshot CSV.
    Analyze(AnalyzeArgs),
    /// Re-render the tables of an existing report.json.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SourceKind {
    Mock,
    Http,
}

#[derive(Debug, Args)]
struct CollectArgs {
    #[arg(long, value_enum, default_value = "mock")]
    source: SourceKind,
    /// Store directory; resumed if it already holds cycles.
    #[arg(long)]
    out_dir: PathBuf,
    /// Mock script (JSON). Without it the mock replays a synthetic corpus.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Base URL of the HTTP stats service.
    #[arg(long)]
    endpoint: Option<String>,
    /// Seconds between poll cycles.
    #[arg(long, default_value_t = attnflow::timeseries::DEFAULT_PERIOD_SECONDS)]
    interval: u64,
    /// Days to keep polling; the default leaves room for a full tracking
    /// window after the last arrival of the built-in mock corpus.
    #[arg(long, default_value_t = 16.0)]
    horizon_days: f64,
    /// Days each video is tracked after first sighting.
    #[arg(long, default_value_t = 14.0)]
    tracking_days: f64,
    /// Epoch seconds of cycle 0 (defaults to the script start, or now).
    #[arg(long)]
    start_time: Option<i64>,
    /// Stop after this many cycles; a later run resumes.
    #[arg(long)]
    max_cycles: Option<u64>,
    /// Seed of the synthetic corpus replayed by the mock source.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    num_trending: usize,
    #[arg(long, default_value_t = 50)]
    num_recent: usize,
    /// HTTP request timeout in seconds.
    #[arg(long, default_value_t = 30)]
    timeout: u64,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long)]
    out_dir: PathBuf,
    /// Generator config (JSON); flags below override its fields.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    num_trending: Option<usize>,
    #[arg(long)]
    num_recent: Option<usize>,
    #[arg(long)]
    num_periods: Option<usize>,
    #[arg(long)]
    period_seconds: Option<u64>,
    #[arg(long)]
    early_volatility: Option<f64>,
    #[arg(long)]
    takedown_rate: Option<f64>,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// Snapshot CSV.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    period_seconds: Option<u64>,
    #[arg(long)]
    num_periods: Option<usize>,
    /// Minimum observable periods for a video to be kept.
    #[arg(long)]
    min_periods: Option<usize>,
    #[arg(long)]
    metric: Option<Metric>,
    /// Top fraction of recent videos forming R5.
    #[arg(long)]
    fraction: Option<f64>,
    #[arg(long)]
    histogram_bin_width: Option<f64>,
    /// per-period | cumulative
    #[arg(long)]
    entropy_mode: Option<NormalizationMode>,
    /// per-period | cumulative
    #[arg(long)]
    divergence_mode: Option<NormalizationMode>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// report.json written by `analyze`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
}

type CliResult = Result<(), Box<dyn std::error::Error>>;

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, A>(argv: I) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return 0;
        }
        Err(e) => {
            let rendered = e.to_string();
            let line = rendered.lines().next().unwrap_or("invalid arguments");
            eprintln!("attnflow: {}", line.trim_start_matches("error: "));
            return 2;
        }
    };
    init_logging(cli.verbose);
    let result = match cli.command {
        Command::Collect(a) => collect(a),
        Command::Generate(a) => generate_cmd(a),
        Command::Analyze(a) => analyze(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("attnflow: {}", one_line(&e.to_string()));
            1
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    // a second init (tests calling run repeatedly) is harmless
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
}

fn one_line(msg: &str) -> String {
    msg.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn create_dir(dir: &Path) -> Result<(), String> {
    fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))
}

fn collect(args: CollectArgs) -> CliResult {
    let mut config = ScheduleConfig::new(&args.out_dir, 0);
    config.interval_seconds = args.interval;
    config.horizon_days = args.horizon_days;
    config.tracking_seconds = (args.tracking_days * 86_400.0).round() as u64;
    config.max_cycles = args.max_cycles;

    let summary = match args.source {
        SourceKind::Mock => {
            let script = match &args.input {
                Some(path) => MockScript::load(path)?,
                None => {
                    let corpus = generate(&GeneratorConfig {
                        seed: args.seed,
                        num_trending: args.num_trending,
                        num_recent: args.num_recent,
                        period_seconds: args.interval,
                        arrival_window_periods: 8,
                        ..GeneratorConfig::default()
                    })?;
                    MockScript::from_corpus(&corpus)
                }
            };
            config.start_time = args.start_time.unwrap_or(script.start_time);
            let mut source = MockSource::new(script)?;
            let mut clock = VirtualClock::new(config.start_time);
            run_schedule(&mut source as &mut dyn StatsSource, &config, &mut clock)?
        }
        SourceKind::Http => {
            let endpoint = args.endpoint.as_deref().ok_or("--source http requires --endpoint")?;
            let mut clock = WallClock;
            config.start_time = args.start_time.unwrap_or_else(|| attnflow::collector::Clock::now(&clock));
            let mut source = HttpSource::new(endpoint, Duration::from_secs(args.timeout));
            run_schedule(&mut source, &config, &mut clock)?
        }
    };
    println!(
        "{} cycles ({} incomplete), {} snapshots, {} new videos -> {}",
        summary.cycles_run,
        summary.incomplete_cycles,
        summary.snapshots_written,
        summary.new_videos,
        args.out_dir.join(SNAPSHOT_FILE).display()
    );
    Ok(())
}

fn generate_cmd(args: GenerateArgs) -> CliResult {
    let mut config = match &args.input {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        None => GeneratorConfig::default(),
    };
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = args.num_trending {
        config.num_trending = v;
    }
    if let Some(v) = args.num_recent {
        config.num_recent = v;
    }
    if let Some(v) = args.num_periods {
        config.num_periods = v;
    }
    if let Some(v) = args.period_seconds {
        config.period_seconds = v;
    }
    if let Some(v) = args.early_volatility {
        config.early_volatility = v;
    }
    if let Some(v) = args.takedown_rate {
        config.takedown_rate = v;
    }
    let corpus = generate(&config)?;

    create_dir(&args.out_dir)?;
    let snap_path = args.out_dir.join(SNAPSHOT_FILE);
    let file = File::create(&snap_path).map_err(|e| format!("{}: {e}", snap_path.display()))?;
    write_snapshots(BufWriter::new(file), &corpus.snapshots())?;
    write_ground_truth(&args.out_dir.join(GROUND_TRUTH_FILE), &corpus)?;
    let config_path = args.out_dir.join(GENERATOR_CONFIG_FILE);
    let text = serde_json::to_string_pretty(&config)? + "\n";
    fs::write(&config_path, text).map_err(|e| format!("{}: {e}", config_path.display()))?;
    println!("{} videos -> {}", corpus.videos.len(), snap_path.display());
    Ok(())
}

fn tier_name(tier: IntendedTier) -> String {
    match tier {
        IntendedTier::Trending(q) => format!("T{q}"),
        IntendedTier::RecentCoupled => "recent_coupled".into(),
        IntendedTier::RecentUncoupled => "recent_uncoupled".into(),
    }
}

fn write_ground_truth(path: &Path, corpus: &SyntheticCorpus) -> CliResult {
    let file = File::create(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "video_id,tier,spiked,taken_down_after")?;
    for v in &corpus.videos {
        let taken = v.taken_down_after.map(|k| k.to_string()).unwrap_or_default();
        writeln!(w, "{},{},{},{}", v.series.video_id, tier_name(v.tier), v.spiked, taken)?;
    }
    w.flush()?;
    Ok(())
}

fn analyze(args: AnalyzeArgs) -> CliResult {
    let defaults = AnalysisConfig::default();
    let config = AnalysisConfig {
        period_seconds: args.period_seconds.unwrap_or(defaults.period_seconds),
        num_periods: args.num_periods.unwrap_or(defaults.num_periods),
        min_periods: args.min_periods.or(defaults.min_periods),
        bins: args.bins.unwrap_or(defaults.bins),
        epsilon: args.epsilon.unwrap_or(defaults.epsilon),
        metric: args.metric.unwrap_or(defaults.metric),
        top_fraction: args.fraction.unwrap_or(defaults.top_fraction),
        histogram_bin_width: args.histogram_bin_width.unwrap_or(defaults.histogram_bin_width),
        entropy_mode: args.entropy_mode.unwrap_or(defaults.entropy_mode),
        divergence_mode: args.divergence_mode.unwrap_or(defaults.divergence_mode),
    };
    let snapshots = read_snapshots_file(&args.input)?;
    let report = analyze_snapshots(&snapshots, &config)?;
    report.write_bundle(&args.out_dir)?;
    println!(
        "{} videos ({} trending, {} recent eligible) -> {}",
        report.summary.videos_seen,
        report.summary.eligible_trending,
        report.summary.eligible_recent,
        args.out_dir.join(REPORT_FILE).display()
    );
    Ok(())
}

fn report(args: ReportArgs) -> CliResult {
    let report = Report::load(&args.input)?;
    report.render_tables(&args.out_dir)?;
    println!("tables -> {}", args.out_dir.display());
    Ok(())
}
