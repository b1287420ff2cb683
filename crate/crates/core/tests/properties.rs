use attnflow::cohorts::{pearson, quintile_split};
use attnflow::infotheory::{
    build_distribution, entropy, kl_divergence, symmetric_divergence, BinningConfig, ProbabilityDistribution,
};
use attnflow::timeseries::{
    clamped_cumulative, impute_missing, normalize, to_per_period, AttentionSeries, Feed, Grid, Metric,
    NormalizationMode,
};
use proptest::prelude::*;

const EPS: f64 = 1e-9;

fn distribution(len: usize) -> impl Strategy<Value = ProbabilityDistribution<f64>> {
    prop::collection::vec(0.0f64..1.0, len).prop_filter_map("nonzero mass", |w| {
        let total: f64 = w.iter().sum();
        (total > 1e-6).then(|| {
            let mut probs: Vec<f64> = w.iter().map(|x| x / total).collect();
            // absorb rounding so the sum is 1 to within the validator's tolerance
            let rest: f64 = probs[1..].iter().sum();
            probs[0] = (1.0 - rest).max(0.0);
            ProbabilityDistribution::from_probs(probs).unwrap()
        })
    })
}

fn pair(max_len: usize) -> impl Strategy<Value = (ProbabilityDistribution<f64>, ProbabilityDistribution<f64>)> {
    (2..=max_len).prop_flat_map(|n| (distribution(n), distribution(n)))
}

fn series(values: Vec<f64>) -> AttentionSeries<f64> {
    let grid = Grid::new(0, 21_600, values.len()).unwrap();
    AttentionSeries::from_cumulative("v", Feed::Trending, grid, Metric::Views, values)
}

fn nondecreasing(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0u32..1000, len).prop_map(|steps| {
        steps
            .iter()
            .scan(0.0, |acc, &s| {
                *acc += s as f64;
                Some(*acc)
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn kl_is_nonnegative((p, q) in pair(40)) {
        prop_assert!(kl_divergence(&p, &q, EPS).unwrap() >= 0.0);
    }

    #[test]
    fn delta_is_symmetric_and_zero_on_self((p, q) in pair(40)) {
        let pq = symmetric_divergence(&p, &q, EPS).unwrap();
        let qp = symmetric_divergence(&q, &p, EPS).unwrap();
        prop_assert_eq!(pq.delta.to_bits(), qp.delta.to_bits());
        prop_assert!(pq.delta >= 0.0);
        prop_assert_eq!(symmetric_divergence(&p, &p, EPS).unwrap().delta, 0.0);
    }

    #[test]
    fn entropy_is_normalized(p in (2usize..64).prop_flat_map(distribution)) {
        let h = entropy(&p);
        prop_assert!(h.normalized >= 0.0 && h.normalized <= 1.0 + 1e-12);
        prop_assert!(h.raw_nats >= 0.0);
    }

    #[test]
    fn distribution_ignores_member_order(
        mut values in prop::collection::vec(0.0f64..=1.0, 1..200),
        seed in any::<u64>(),
    ) {
        let config = BinningConfig::new(32, EPS).unwrap();
        let before = build_distribution(&values, &config).unwrap();
        // deterministic shuffle
        let mut state = seed | 1;
        for i in (1..values.len()).rev() {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            values.swap(i, (state % (i as u64 + 1)) as usize);
        }
        let after = build_distribution(&values, &config).unwrap();
        prop_assert_eq!(before.probs(), after.probs());
        let h = entropy(&before).normalized;
        prop_assert_eq!(h.to_bits(), entropy(&after).normalized.to_bits());
    }

    #[test]
    fn smoothing_vanishes_as_epsilon_shrinks((p, q) in pair(16)) {
        let exact = kl_divergence(&p, &q, 0.0);
        prop_assume!(exact.is_ok());
        let exact = exact.unwrap();
        prop_assume!(exact.is_finite());
        // the smoothing error scales with eps / q_i, so keep q away from 0 where p has mass
        let min_q = p.probs().iter().zip(q.probs()).filter(|(pi, _)| **pi > 0.0).map(|(_, qi)| *qi).fold(1.0, f64::min);
        prop_assume!(min_q > 1e-3);
        let gaps: Vec<f64> = [1e-4, 1e-6, 1e-8]
            .iter()
            .map(|&eps| (kl_divergence(&p, &q, eps).unwrap() - exact).abs())
            .collect();
        prop_assert!(gaps[2] <= gaps[0] + 1e-12);
        prop_assert!(gaps[2] < 1e-5);
    }

    #[test]
    fn pearson_is_symmetric_and_bounded(
        ab in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 2..60),
    ) {
        let (a, b): (Vec<f64>, Vec<f64>) = ab.into_iter().unzip();
        let r1 = pearson(&a, &b).unwrap();
        let r2 = pearson(&b, &a).unwrap();
        prop_assert!((r1.rho - r2.rho).abs() < 1e-12);
        prop_assert!(r1.rho >= -1.0 && r1.rho <= 1.0);
        if r1.undefined {
            prop_assert_eq!(r1.rho, 0.0);
        }
    }

    #[test]
    fn pearson_is_affine_invariant(
        ab in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 3..60),
        scale in 0.01f64..100.0,
        shift in -1e3f64..1e3,
    ) {
        let (a, b): (Vec<f64>, Vec<f64>) = ab.into_iter().unzip();
        let r = pearson(&a, &b).unwrap();
        prop_assume!(!r.undefined);
        let a2: Vec<f64> = a.iter().map(|x| scale * x + shift).collect();
        let r2 = pearson(&a2, &b).unwrap();
        prop_assert!((r.rho - r2.rho).abs() < 1e-9);
        let neg: Vec<f64> = a.iter().map(|x| -scale * x).collect();
        prop_assert!((pearson(&neg, &b).unwrap().rho + r.rho).abs() < 1e-9);
    }

    #[test]
    fn quintiles_partition_by_total(totals in prop::collection::vec(0u32..50, 5..120)) {
        let videos: Vec<(String, f64)> = totals
            .iter()
            .enumerate()
            .map(|(i, &t)| (format!("v{i:04}"), t as f64))
            .collect();
        let cohorts = quintile_split(&videos).unwrap();
        prop_assert_eq!(cohorts.len(), 5);
        let mut all: Vec<&String> = cohorts.iter().flat_map(|c| &c.member_ids).collect();
        prop_assert_eq!(all.len(), videos.len());
        all.sort();
        all.dedup();
        prop_assert_eq!(all.len(), videos.len());
        let sizes: Vec<usize> = cohorts.iter().map(|c| c.member_ids.len()).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        let total_of = |id: &String| videos.iter().find(|(v, _)| v == id).unwrap().1;
        for w in cohorts.windows(2) {
            let lo = w[0].member_ids.iter().map(total_of).fold(f64::MIN, f64::max);
            let hi = w[1].member_ids.iter().map(total_of).fold(f64::MAX, f64::min);
            prop_assert!(lo <= hi);
        }
    }

    #[test]
    fn imputation_is_idempotent(values in nondecreasing(3..40), holes in prop::collection::vec(any::<bool>(), 40)) {
        let n = values.len();
        let grid = Grid::new(0, 100, n).unwrap();
        // first and last slot always observed, so every gap is bounded
        let snaps: Vec<attnflow::Snapshot> = (0..n)
            .filter(|&k| k == 0 || k == n - 1 || !holes[k])
            .map(|k| attnflow::Snapshot {
                video_id: "v".into(),
                feed: Feed::Trending,
                observed_at: 100 * k as i64,
                views: values[k] as u64,
                likes: 0,
                comments: 0,
            })
            .collect();
        let aligned = attnflow::timeseries::align_snapshots::<f64>(&snaps, Metric::Views, grid).unwrap();
        let once = impute_missing(&aligned).unwrap();
        let twice = impute_missing(&once).unwrap();
        prop_assert_eq!(&once, &twice);
        for k in 0..n {
            if !aligned.is_pending(k) {
                prop_assert_eq!(once.cumulative[k], values[k]);
            }
        }
    }

    #[test]
    fn per_period_sums_back_to_cumulative(values in nondecreasing(2..60)) {
        let s = series(values.clone());
        let diffs = to_per_period(&s).unwrap();
        prop_assert!(diffs.iter().all(|&d| d >= 0.0));
        prop_assert_eq!(clamped_cumulative(&s).unwrap(), values);
    }

    #[test]
    fn shares_sum_to_one(values in nondecreasing(2..60)) {
        let s = series(values.clone());
        let per = normalize(&s, NormalizationMode::PerPeriodShare).unwrap();
        let cum = normalize(&s, NormalizationMode::CumulativeShare).unwrap();
        if *values.last().unwrap() == 0.0 {
            prop_assert!(per.zero_attention && cum.zero_attention);
            prop_assert!(per.values.iter().all(|&v| v == 0.0));
        } else {
            prop_assert!((per.values.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert_eq!(*cum.values.last().unwrap(), 1.0);
            prop_assert!(cum.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn shares_ignore_magnitude(values in nondecreasing(2..60), factor in 1.0f64..1e6) {
        let s = series(values.clone());
        let scaled = series(values.iter().map(|v| v * factor).collect());
        for mode in [NormalizationMode::PerPeriodShare, NormalizationMode::CumulativeShare] {
            let a = normalize(&s, mode).unwrap().values;
            let b = normalize(&scaled, mode).unwrap().values;
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
