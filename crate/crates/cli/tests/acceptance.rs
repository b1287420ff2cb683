//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails or exceeds its time budget.

use std::collections::BTreeMap;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use attnflow::cohorts::{pearson, pooled_correlation_histogram, CorrelationProfile};
use attnflow::collector::{run_schedule, MockScript, MockSource, ScheduleConfig, SnapshotStore, VirtualClock};
use attnflow::infotheory::{entropy, kl_divergence, symmetric_divergence, ProbabilityDistribution};
use attnflow::pipeline::{analyze_snapshots, analyze_videos, group_snapshots, AnalysisConfig};
use attnflow::report::Report;
use attnflow::synthgen::{generate, GeneratorConfig, IntendedTier, SyntheticCorpus};
use attnflow::timeseries::filter_eligible;
use attnflow::{CohortLabel, Snapshot};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EPS: f64 = 1e-9;
const SEED: u64 = 7;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

// ---------------------------------------------------------------------------
// Brute-force oracles, independent of the library's code paths.

fn oracle_kl(p: &[f64], q: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..p.len() {
        if p[i] > 0.0 {
            total += p[i] * (p[i].ln() - q[i].ln());
        }
    }
    total
}

fn oracle_entropy(p: &[f64]) -> f64 {
    let mut total = 0.0;
    for &x in p {
        if x > 0.0 {
            total -= x * x.ln();
        }
    }
    total
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties.
fn spearman(a: &[f64], b: &[f64]) -> f64 {
    pearson(&ranks(a), &ranks(b)).expect("equal lengths").rho
}

// ---------------------------------------------------------------------------

fn axioms() -> Outcome {
    for b in [2usize, 4, 8, 32, 128] {
        let uniform = ProbabilityDistribution::from_probs(vec![1.0 / b as f64; b]).unwrap();
        let h = entropy(&uniform).normalized;
        check((h - 1.0).abs() <= 1e-12, format!("entropy(uniform, B={b}) = {h}"))?;
        for hot in [0, b - 1] {
            let mut probs = vec![0.0f64; b];
            probs[hot] = 1.0;
            let point = ProbabilityDistribution::from_probs(probs).unwrap();
            let h = entropy(&point).normalized;
            check(h.abs() <= 1e-12, format!("entropy(point mass, B={b}) = {h}"))?;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut min_kl = f64::INFINITY;
    for _ in 0..10_000 {
        let b = rng.random_range(2..=64);
        let draw = |rng: &mut ChaCha8Rng| {
            // sparse supports included: about 30% of bins empty
            let w: Vec<f64> = (0..b)
                .map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random::<f64>() })
                .collect();
            let total: f64 = w.iter().sum();
            let probs = if total > 0.0 {
                w.iter().map(|x| x / total).collect()
            } else {
                let mut v = vec![0.0; b];
                v[0] = 1.0;
                v
            };
            ProbabilityDistribution::from_probs(probs).unwrap()
        };
        let p = draw(&mut rng);
        let q = draw(&mut rng);
        let d = kl_divergence(&p, &q, EPS).unwrap();
        min_kl = min_kl.min(d);
        check(d >= 0.0, format!("KL = {d} < 0"))?;
        let pq = symmetric_divergence(&p, &q, EPS).unwrap().delta;
        let qp = symmetric_divergence(&q, &p, EPS).unwrap().delta;
        check(pq.to_bits() == qp.to_bits(), format!("delta asymmetric: {pq} vs {qp}"))?;
        let pp = symmetric_divergence(&p, &p, EPS).unwrap().delta;
        check(pp == 0.0, format!("delta(p, p) = {pp}"))?;
    }
    Ok(format!("B in {{2,4,8,32,128}} exact to 1e-12; 10^4 pairs, min KL {min_kl:.3e}"))
}

fn hand_oracle() -> Outcome {
    let p = [0.5, 0.5];
    let q = [0.25, 0.75];
    let d_pq = oracle_kl(&p, &q);
    let d_qp = oracle_kl(&q, &p);
    let delta = (d_pq + d_qp) / (oracle_entropy(&p) + oracle_entropy(&q));

    let pd = ProbabilityDistribution::from_probs(p.to_vec()).unwrap();
    let qd = ProbabilityDistribution::from_probs(q.to_vec()).unwrap();
    let lib = symmetric_divergence(&pd, &qd, EPS).unwrap();
    for (name, got, want, reference) in [
        ("D(p||q)", lib.d_pq, d_pq, 0.1438),
        ("D(q||p)", lib.d_qp, d_qp, 0.1308),
        ("delta", lib.delta, delta, 0.2188),
    ] {
        check((got - want).abs() <= 1e-3, format!("{name}: library {got} vs oracle {want}"))?;
        check((got - reference).abs() <= 1e-3, format!("{name}: {got} vs reference {reference}"))?;
    }
    Ok(format!(
        "D(p||q) {:.4}, D(q||p) {:.4}, delta {:.4}",
        lib.d_pq, lib.d_qp, lib.delta
    ))
}

fn imputation_exactness() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let start = 1_348_185_600;
    let interval = 21_600;
    let script: MockScript = serde_json::from_value(serde_json::json!({
        "start_time": start,
        "interval_seconds": interval,
        "outages": [5],
        "videos": [
            {"video_id": "a", "feed": "trending", "appear_cycle": 0,
             "views": [3, 7, 19, 40, 41, 100, 133, 250],
             "likes": [0, 1, 1, 2, 3, 5, 9, 13],
             "comments": [0, 0, 0, 1, 1, 2, 4, 4]}
        ]
    }))
    .map_err(|e| e.to_string())?;
    let mut config = ScheduleConfig::new(dir.path(), start);
    config.interval_seconds = interval;
    config.horizon_days = 2.0;
    let mut source = MockSource::new(script).map_err(|e| e.to_string())?;
    run_schedule(&mut source, &config, &mut VirtualClock::new(start)).map_err(|e| e.to_string())?;

    let store = SnapshotStore::open(dir.path()).map_err(|e| e.to_string())?;
    let marker = &store.markers()[5];
    check(!marker.completed, "cycle 5 marker not flagged incomplete")?;
    let snaps = store.read_snapshots().map_err(|e| e.to_string())?;
    let videos = group_snapshots(&snaps, interval, 8).map_err(|e| e.to_string())?;
    let eligible = filter_eligible(&videos, 8);
    check(eligible.len() == 1, "video not eligible after imputation")?;
    let v = &eligible[0];
    for (name, series, lo, hi) in [
        ("views", &v.views, 41.0, 133.0),
        ("likes", &v.likes, 3.0, 9.0),
        ("comments", &v.comments, 1.0, 4.0),
    ] {
        let want = (lo + hi) / 2.0;
        check(
            series.cumulative[5] == want && series.imputed_mask[5],
            format!("{name} slot 5 = {} (want {want})", series.cumulative[5]),
        )?;
    }
    Ok(format!("slot 5 views imputed to {} = (41 + 133) / 2", v.views.cumulative[5]))
}

struct Corpus {
    corpus: SyntheticCorpus,
    report: Report,
}

fn seeded_corpus() -> Corpus {
    let config = GeneratorConfig {
        seed: SEED,
        ..Default::default()
    };
    let corpus = generate(&config).expect("default config is valid");
    let videos: Vec<_> = corpus.videos.iter().map(|v| v.series.clone()).collect();
    let report = analyze_videos(&videos, &AnalysisConfig::default()).expect("corpus analyses");
    Corpus { corpus, report }
}

fn size_ok(c: &Corpus) -> Result<(), String> {
    check(
        c.corpus.videos.len() >= 1000 && c.corpus.config.num_periods == 56,
        format!("corpus has {} videos", c.corpus.videos.len()),
    )
}

fn entropy_decay(c: &Corpus) -> Outcome {
    size_ok(c)?;
    let mean = &c.report.entropy_summary.mean;
    let var = &c.report.entropy_summary.variance;
    let early = mean[0..8].iter().sum::<f64>() / 8.0;
    let late = mean[23..56].iter().sum::<f64>() / 33.0;
    check(early >= 2.0 * late, format!("early {early:.4} vs late {late:.4}"))?;
    check(var[55] < var[1], format!("final variance {:.3e} vs period-2 variance {:.3e}", var[55], var[1]))?;
    Ok(format!(
        "mean entropy periods 1-8 {early:.3} vs 24-56 {late:.3}; variance {:.2e} -> {:.2e}",
        var[1], var[55]
    ))
}

fn divergence_ordering(c: &Corpus) -> Outcome {
    size_ok(c)?;
    let mut distance = Vec::new();
    let mut mean_delta = Vec::new();
    for curve in &c.report.divergence_curves {
        if curve.cohort_a == CohortLabel::R5 || curve.cohort_b == CohortLabel::R5 {
            continue;
        }
        distance.push(curve.cohort_a.rank().abs_diff(curve.cohort_b.rank()) as f64);
        mean_delta.push(curve.mean_delta());
    }
    check(distance.len() == 10, format!("{} quintile pairs", distance.len()))?;
    let rho = spearman(&distance, &mean_delta);
    check(rho > 0.8, format!("Spearman {rho:.3}"))?;
    Ok(format!("Spearman(distance, mean delta) = {rho:.3} over 10 pairs"))
}

fn lagged_early(c: &Corpus) -> Outcome {
    size_ok(c)?;
    let mut peaks = Vec::new();
    for curve in &c.report.lagged_curves {
        let at = curve.argmax().ok_or("empty lagged curve")?;
        check(at < 4, format!("{} peaks at step {at}", curve.cohort_a))?;
        peaks.push(format!("{}@{}", curve.cohort_a, at));
    }
    check(peaks.len() == 6, "expected six cohorts")?;
    Ok(format!("peaks {}", peaks.join(" ")))
}

fn correlation_shape(c: &Corpus) -> Outcome {
    check(c.corpus.config.metric_coupling == 0.95, "coupling target is not 0.95")?;
    let profiles = |keep: fn(IntendedTier) -> bool| -> Vec<CorrelationProfile<f64>> {
        c.corpus
            .videos
            .iter()
            .filter(|v| keep(v.tier))
            .map(|v| CorrelationProfile::compute(&v.series.views, &v.series.likes, &v.series.comments).unwrap())
            .collect()
    };
    let trending = profiles(|t| matches!(t, IntendedTier::Trending(_)));
    let uncoupled = profiles(|t| t == IntendedTier::RecentUncoupled);
    let high = pooled_correlation_histogram(&trending, 0.1).unwrap().mass_between(0.8, 1.0);
    let near_zero = pooled_correlation_histogram(&uncoupled, 0.1).unwrap().mass_between(-0.2, 0.2);
    check(high >= 0.8, format!("trending mass in [0.8, 1] = {high:.3}"))?;
    check(near_zero >= 0.8, format!("uncoupled recent mass in [-0.2, 0.2] = {near_zero:.3}"))?;
    Ok(format!(
        "trending {high:.3} in [0.8,1] (n={}); uncoupled recent {near_zero:.3} in [-0.2,0.2] (n={})",
        trending.len(),
        uncoupled.len()
    ))
}

fn read_dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

fn pipeline_determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_attnflow");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut bundles = Vec::new();
    for run in ["a", "b"] {
        let data = dir.path().join(run).join("data");
        let out = dir.path().join(run).join("report");
        let input = data.join("snapshots.csv");
        let seed = SEED.to_string();
        let steps: [Vec<&std::ffi::OsStr>; 2] = [
            vec!["generate".as_ref(), "--seed".as_ref(), seed.as_ref(), "--out-dir".as_ref(), data.as_os_str()],
            vec![
                "analyze".as_ref(),
                "--input".as_ref(),
                input.as_os_str(),
                "--out-dir".as_ref(),
                out.as_os_str(),
            ],
        ];
        for args in steps {
            let status = Command::new(bin).args(&args).output().map_err(|e| e.to_string())?;
            check(
                status.status.success(),
                format!("{:?} failed: {}", args, String::from_utf8_lossy(&status.stderr)),
            )?;
        }
        bundles.push((read_dir_bytes(&data), read_dir_bytes(&out)));
    }
    check(bundles[0].0 == bundles[1].0, "generated corpora differ")?;
    check(bundles[0].1 == bundles[1].1, "report bundles differ")?;
    check(bundles[0].1.contains_key("report.json"), "no report.json")?;
    Ok(format!("{} bundle files byte-identical across runs", bundles[0].1.len()))
}

fn scale_invariance(c: &Corpus) -> Outcome {
    let config = AnalysisConfig::default();
    let snaps = c.corpus.snapshots();
    let scaled: Vec<Snapshot> = snaps
        .iter()
        .map(|s| Snapshot {
            views: s.views * 1000,
            likes: s.likes * 1000,
            comments: s.comments * 1000,
            ..s.clone()
        })
        .collect();
    let base = analyze_snapshots(&snaps, &config).map_err(|e| e.to_string())?;
    let big = analyze_snapshots(&scaled, &config).map_err(|e| e.to_string())?;
    check(base.cohorts == big.cohorts, "cohort membership changed under scaling")?;
    let mut worst: f64 = 0.0;
    let mut compare = |a: &[f64], b: &[f64]| -> Result<(), String> {
        check(a.len() == b.len(), "curve length changed")?;
        for (x, y) in a.iter().zip(b) {
            worst = worst.max((x - y).abs());
        }
        Ok(())
    };
    for (a, b) in base.entropy_curves.iter().zip(&big.entropy_curves) {
        compare(&a.entropy, &b.entropy)?;
    }
    for (a, b) in base
        .divergence_curves
        .iter()
        .chain(&base.lagged_curves)
        .zip(big.divergence_curves.iter().chain(&big.lagged_curves))
    {
        compare(&a.delta, &b.delta)?;
    }
    check(worst <= 1e-9, format!("max deviation {worst:.3e}"))?;
    Ok(format!("max deviation {worst:.1e} across 6 entropy, 15 pair and 6 lagged curves"))
}

struct Criterion<'a> {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: Box<dyn FnOnce() -> Outcome + 'a>,
}

fn main() -> ExitCode {
    // the shared corpus is built once; its cost is charged to each criterion using it
    let setup_start = Instant::now();
    let corpus = seeded_corpus();
    let setup = setup_start.elapsed();
    let c = &corpus;

    let secs = Duration::from_secs;
    let criteria: Vec<Criterion> = vec![
        Criterion { id: 1, name: "information-theory axioms", budget: secs(1), run: Box::new(axioms) },
        Criterion { id: 2, name: "hand-oracle equivalence", budget: secs(1), run: Box::new(hand_oracle) },
        Criterion { id: 3, name: "imputation exactness", budget: secs(5), run: Box::new(imputation_exactness) },
        Criterion { id: 4, name: "entropy decay", budget: secs(30), run: Box::new(|| entropy_decay(c)) },
        Criterion { id: 5, name: "divergence ordering", budget: secs(30), run: Box::new(|| divergence_ordering(c)) },
        Criterion { id: 6, name: "lagged divergence early", budget: secs(30), run: Box::new(|| lagged_early(c)) },
        Criterion { id: 7, name: "correlation histogram shape", budget: secs(10), run: Box::new(|| correlation_shape(c)) },
        Criterion { id: 8, name: "pipeline determinism", budget: secs(60), run: Box::new(pipeline_determinism) },
        Criterion { id: 9, name: "scale invariance", budget: secs(30), run: Box::new(|| scale_invariance(c)) },
    ];

    let mut failed = 0;
    for criterion in criteria {
        let shared = if matches!(criterion.id, 4..=7 | 9) { setup } else { Duration::ZERO };
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(criterion.run))
            .unwrap_or_else(|_| Err("panicked".to_string()));
        let elapsed = start.elapsed() + shared;
        let outcome = match outcome {
            Ok(detail) if elapsed > criterion.budget => Err(format!(
                "{detail}; took {:.2}s, budget {}s",
                elapsed.as_secs_f64(),
                criterion.budget.as_secs()
            )),
            other => other,
        };
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!(
            "{tag} criterion {} ({}) [{:.2}s]: {detail}",
            criterion.id,
            criterion.name,
            elapsed.as_secs_f64()
        );
    }
    if failed == 0 {
        println!("acceptance: all 9 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} of 9 criteria failed");
        ExitCode::FAILURE
    }
}
