use std::collections::HashMap;

use cachepir::protocol::{
    answer_queries, decode_desired, generate_query_plan, structural_privacy_histogram, QueryPlan,
};
use cachepir::seed;
use proptest::prelude::*;
use rand::Rng;

fn choose(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

fn random_symbols(files: usize, length: usize, seed_value: u64) -> Vec<Vec<u8>> {
    let mut rng = seed::rng(seed_value);
    (0..files)
        .map(|_| (0..length).map(|_| rng.random::<bool>() as u8).collect())
        .collect()
}

/// XOR evaluation straight from the canonical transcript text.
fn evaluate_transcript(text: &str, symbols: &[Vec<u8>]) -> Vec<u8> {
    text.lines()
        .map(|line| {
            line.split_whitespace()
                .map(|term| {
                    let inner = term.trim_start_matches('(').trim_end_matches(')');
                    let (f, p) = inner.split_once(',').unwrap();
                    symbols[f.parse::<usize>().unwrap()][p.parse::<usize>().unwrap()]
                })
                .fold(0, |a, b| a ^ b)
        })
        .collect()
}

#[test]
fn count_identities_for_small_systems() {
    for n in 2..=5usize {
        for k in 1..=5usize {
            let block = n.pow(k as u32);
            let plan = generate_query_plan(n, k, k - 1, block, (n * 10 + k) as u64).unwrap();
            let per_db: usize = (1..=k).map(|j| choose(k, j) * (n - 1).pow(j as u32 - 1)).sum();
            let recovered_per_db: usize = (1..=k)
                .map(|j| choose(k - 1, j - 1) * (n - 1).pow(j as u32 - 1))
                .sum();
            assert_eq!(recovered_per_db, n.pow(k as u32 - 1));
            for d in 0..n {
                assert_eq!(plan.queries(d).len(), per_db, "n={n} K={k}");
                assert_eq!(plan.desired_count(d), recovered_per_db);
            }
            assert_eq!(plan.total_queries(), n * (block - 1) / (n - 1));
        }
    }
}

#[test]
fn fixed_store_answers_match_hand_sums() {
    // File 0 = 1011, file 1 = 0110.
    let symbols = vec![vec![1, 0, 1, 1], vec![0, 1, 1, 0]];
    let plan = generate_query_plan(2, 2, 0, 4, 12345).unwrap();
    let mut bits = 0;
    for d in 0..2 {
        assert_eq!(plan.queries(d).len(), 3);
        let a = answer_queries(plan.queries(d), &symbols).unwrap();
        assert_eq!(a.0, evaluate_transcript(&plan.transcript(d), &symbols));
        bits += a.len();
    }
    assert_eq!(bits, 6);
}

#[test]
fn side_info_links_consume_each_undesired_sum_n_minus_one_times() {
    for (n, k) in [(2usize, 3usize), (3, 3), (4, 2), (3, 4)] {
        let len = n * n.pow(k as u32);
        let plan = generate_query_plan(n, k, 1, len, 3).unwrap();
        let mut uses: HashMap<(usize, usize), usize> = HashMap::new();
        for d in 0..n {
            for slot in plan.desired_slots(d).iter().flatten() {
                if let Some(link) = slot.side_info {
                    assert_ne!(link.replica, d, "side info comes from another database");
                    let q = &plan.queries(link.replica)[link.query];
                    assert!(!q.involves(1), "linked sums are purely undesired");
                    *uses.entry((link.replica, link.query)).or_insert(0) += 1;
                }
            }
        }
        for d in 0..n {
            for (r, q) in plan.queries(d).iter().enumerate() {
                if !q.involves(1) && q.order() < k {
                    assert_eq!(uses.get(&(d, r)), Some(&(n - 1)), "n={n} K={k}");
                } else {
                    assert_eq!(uses.get(&(d, r)), None);
                }
            }
        }
    }
}

#[test]
fn desired_positions_are_each_used_once() {
    let plan = generate_query_plan(3, 3, 2, 54, 8).unwrap();
    let mut seen = vec![0; 54];
    for d in 0..3 {
        for q in plan.queries(d) {
            for &(f, p) in q.terms() {
                if f == 2 {
                    seen[p] += 1;
                }
            }
        }
    }
    assert!(seen.iter().all(|&c| c == 1));
}

#[test]
fn histograms_equal_across_desired_files() {
    for (n, k) in [(2usize, 3usize), (3, 2), (2, 4), (4, 3), (5, 2)] {
        let len = n.pow(k as u32);
        let reference = structural_privacy_histogram(&generate_query_plan(n, k, 0, len, 1).unwrap()).unwrap();
        for theta in 1..k {
            let h = structural_privacy_histogram(&generate_query_plan(n, k, theta, len, 99).unwrap()).unwrap();
            assert_eq!(h, reference, "n={n} K={k} theta={theta}");
        }
        for per_db in &reference {
            for ((order, set), &count) in per_db {
                assert_eq!(set.len(), *order);
                assert_eq!(count, (n - 1).pow(*order as u32 - 1));
            }
        }
    }
}

#[test]
fn single_database_plan_costs_k_lambda() {
    let plan = QueryPlan::download_all(vec![5, 5, 5], 1);
    let symbols = random_symbols(3, 5, 4);
    let a = answer_queries(plan.queries(0), &symbols).unwrap();
    assert_eq!(a.len(), 15);
    assert_eq!(decode_desired(&plan, &[a]).unwrap(), symbols[1]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn decode_recovers_desired_symbols(
        n in 2usize..=4,
        k in 1usize..=4,
        blocks in 1usize..=3,
        theta_pick in 0usize..4,
        seed_value in any::<u64>(),
    ) {
        let theta = theta_pick % k;
        let len = blocks * n.pow(k as u32);
        let plan = generate_query_plan(n, k, theta, len, seed_value).unwrap();
        let symbols = random_symbols(k, len, seed_value ^ 0xabc);
        let answers: Vec<_> = (0..n)
            .map(|d| answer_queries(plan.queries(d), &symbols).unwrap())
            .collect();
        prop_assert_eq!(decode_desired(&plan, &answers).unwrap(), symbols[theta].clone());
        prop_assert_eq!(plan.total_queries(), blocks * n * (n.pow(k as u32) - 1) / (n - 1));
    }
}
