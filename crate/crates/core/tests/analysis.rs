use cachepir::analysis::{
    capacity_classical, capacity_decentralized, centralized_envelope, converse_bound_realization,
    expected_converse_bound, minimize_expected_bound, three_file_two_database_bound,
    BoundObjective, MarginalProfile, OptimizerConfig,
};
use cachepir::model::partition_by_storage_set;
use cachepir::placement::{empirical_marginals, sample_placement, PlacementPolicy};
use cachepir::ratio::{binomial_q, frac, int, pow, to_f64, Rational, StorageRatio};

fn ratio(n: i64, d: i64) -> StorageRatio {
    StorageRatio::from_fraction(n, d).unwrap()
}

#[test]
fn lemma_terms_at_uniform_are_exact() {
    for (k, n) in [(3usize, 2usize), (5, 4), (2, 7)] {
        for i in 0..=10 {
            let mu = ratio(i, 10);
            let m = MarginalProfile::uniform(k, 6, &mu);
            let terms = expected_converse_bound(&m, n, &mu).unwrap();
            for l in 1..=n + 1 {
                let want = int(6)
                    * pow(mu.value(), l - 1)
                    * pow(&(int(1) - mu.value()), n + 1 - l)
                    * binomial_q(n, l - 1)
                    / binomial_q(n + 1, l);
                assert_eq!(terms.levels[l - 1], want, "K={k} N={n} mu={mu} l={l}");
            }
        }
    }
}

#[test]
fn realization_bounds_average_to_expected_bound() {
    // Monte Carlo mean over 10^4 uniform placements vs the exact expectation.
    let (k, n, l) = (3usize, 2usize, 6usize);
    let mu = ratio(1, 3);
    let policy = PlacementPolicy::uniform(mu.clone());
    let samples: Vec<f64> = (0..10_000u64)
        .map(|s| {
            let r = sample_placement(&policy, k, l, n, s).unwrap();
            to_f64(&converse_bound_realization(&partition_by_storage_set(&r, k, l).unwrap()).unwrap().bound)
        })
        .collect();
    let count = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / count;
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1.0);
    let se = (var / count).sqrt();
    let expected = to_f64(
        &expected_converse_bound(&MarginalProfile::uniform(k, l, &mu), n, &mu).unwrap().bound,
    );
    assert!((mean - expected).abs() < 3.0 * se, "mean {mean} expected {expected} se {se}");
}

#[test]
fn specialized_and_general_bounds_agree() {
    let policy = PlacementPolicy::uniform(ratio(1, 3));
    for s in 0..20u64 {
        let r = sample_placement(&policy, 3, 9, 2, s).unwrap();
        let p = partition_by_storage_set(&r, 3, 9).unwrap();
        assert_eq!(
            three_file_two_database_bound(&p).unwrap(),
            converse_bound_realization(&p).unwrap().bound
        );
    }
}

#[test]
fn capacity_is_monotone_on_plotted_ranges() {
    let half = ratio(1, 2);
    let by_n: Vec<Rational> = (0..=30).map(|n| capacity_decentralized(10, n, &half)).collect();
    assert!(by_n.windows(2).all(|w| w[1] < w[0]));
    assert_eq!(by_n[0], int(10));
    let by_mu: Vec<Rational> = (0..=20)
        .map(|i| capacity_decentralized(10, 5, &ratio(i, 20)))
        .collect();
    assert!(by_mu.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn centralized_envelope_lies_below_decentralized() {
    let env = centralized_envelope(10, 5).unwrap();
    for i in 0..=100 {
        let mu = ratio(i, 100);
        let c = env.evaluate(mu.value()).unwrap();
        let d = capacity_decentralized(10, 5, &mu);
        assert!(c <= d, "mu={mu}");
        if i == 0 || i == 100 {
            assert_eq!(c, d);
        }
    }
    assert_eq!(env.corners()[0], (int(0), int(10)));
    assert_eq!(env.corners()[5], (int(1), capacity_classical(10, 6)));
}

#[test]
fn uniform_marginals_concentrate_at_mu() {
    let (k, l, trials) = (3usize, 4usize, 10_000usize);
    let mu = ratio(1, 3);
    let m = empirical_marginals(&PlacementPolicy::uniform(mu.clone()), k, l, trials, 21).unwrap();
    let p = mu.to_f64();
    let se = (p * (1.0 - p) / trials as f64).sqrt();
    let values = m.to_f64();
    for &v in &values {
        assert!((v - p).abs() < 3.0 * se, "{v} vs {p}");
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    for &v in &values {
        assert!((v - mean).abs() < 3.0 * se);
    }
}

#[test]
fn databases_cache_independently() {
    // Joint inclusion of a fixed address in H_1 and H_2 is p^2.
    let (k, l, trials) = (2usize, 3usize, 10_000u64);
    let mu = ratio(1, 2);
    let policy = PlacementPolicy::uniform(mu.clone());
    let target = cachepir::model::BitAddress::new(1, 2);
    let both = (0..trials)
        .filter(|&s| {
            let r = sample_placement(&policy, k, l, 2, s).unwrap();
            r.set(1).contains(&target) && r.set(2).contains(&target)
        })
        .count() as f64;
    let p2 = 0.25;
    let se = (p2 * (1.0 - p2) / trials as f64).sqrt();
    assert!((both / trials as f64 - p2).abs() < 3.0 * se);
}

#[test]
fn optimizer_finds_uniform_on_aggregate_bound() {
    for (k, n, num, den) in [(2usize, 2usize, 1i64, 2i64), (3, 2, 1, 3), (3, 3, 2, 3)] {
        let mu = ratio(num, den);
        let l = 10 / k;
        let report = minimize_expected_bound(k, n, &mu, l, &OptimizerConfig::new(100, 7)).unwrap();
        let exact = to_f64(&capacity_decentralized(k, n, &mu)) * l as f64;
        assert!((report.uniform_value - exact).abs() < 1e-9);
        for r in &report.restarts {
            assert!(r.value >= report.uniform_value - 1e-6 * l as f64);
        }
        assert!(report.uniform_gradient_norm < 1e-8);
    }
}

#[test]
fn per_level_objectives_are_reported() {
    // Individual E[x_l] need not be minimized by uniform placement; the
    // optimizer exposes where a single level drops below the uniform value.
    let mu = ratio(1, 3);
    let mut below = Vec::new();
    for level in 1..=3 {
        let mut cfg = OptimizerConfig::new(10, 2);
        cfg.objective = BoundObjective::Level(level);
        let report = minimize_expected_bound(3, 2, &mu, 4, &cfg).unwrap();
        let uniform = to_f64(
            &expected_converse_bound(&MarginalProfile::uniform(3, 4, &mu), 2, &mu).unwrap().levels[level - 1],
        );
        assert!((report.uniform_value - uniform).abs() < 1e-9);
        if report.best_value < uniform - 1e-6 {
            below.push(level);
        }
    }
    // Level 3 (bits on every node) drops to zero when nothing is cached.
    assert!(below.contains(&3));
    assert!(!below.contains(&1));
}

#[test]
fn optimizer_report_converts_to_profile() {
    let mu = ratio(1, 2);
    let report = minimize_expected_bound(2, 1, &mu, 3, &OptimizerConfig::new(4, 1)).unwrap();
    let profile = report.best_profile().unwrap();
    assert!(profile.total() <= frac(3, 1) + frac(1, 1_000_000));
}
