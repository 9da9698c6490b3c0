use num_traits::{One, Zero};

use crate::ratio::{binomial_q, frac, pow, Rational, StorageRatio};

/// Classical replicated-database PIR cost `1 + 1/n + ... + 1/n^(K-1)`.
pub fn capacity_classical(files: usize, replicas: usize) -> Rational {
    assert!(replicas >= 1, "classical PIR needs at least one database");
    let step = frac(1, replicas as i64);
    let mut term = Rational::one();
    let mut total = Rational::zero();
    for _ in 0..files {
        total += &term;
        term *= &step;
    }
    total
}

/// `1/l + 1/l^2 + ... + 1/l^(K-1)`: the weight of level `l` in the converse.
pub fn harmonic_tail(files: usize, level: usize) -> Rational {
    capacity_classical(files, level) - Rational::one()
}

/// Normalized download cost of uniform decentralized caching with `N`
/// caching databases plus the data center.
pub fn capacity_decentralized(files: usize, databases: usize, ratio: &StorageRatio) -> Rational {
    let mu = ratio.value();
    let rest = Rational::one() - mu;
    (1..=databases + 1)
        .map(|n| {
            binomial_q(databases, n - 1)
                * pow(mu, n - 1)
                * pow(&rest, databases + 1 - n)
                * capacity_classical(files, n)
        })
        .sum()
}

/// `sum_n C(N, n-1) mu^(n-1) (1-mu)^(N+1-n)`; identically one.
pub fn binomial_mass_total(databases: usize, ratio: &StorageRatio) -> Rational {
    let mu = ratio.value();
    let rest = Rational::one() - mu;
    (1..=databases + 1)
        .map(|n| binomial_q(databases, n - 1) * pow(mu, n - 1) * pow(&rest, databases + 1 - n))
        .sum()
}
