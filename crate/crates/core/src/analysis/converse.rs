//! Converse (lower) bound on the download cost, per realization and in
//! expectation over a placement distribution's per-bit marginals.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::model::StorageSetPartition;
use crate::ratio::{binomial_q, int, pow, Rational, StorageRatio};

use super::harmonic_tail;

/// Level terms of the bound `L + sum_l C(N+1,l) h_l x_l`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConverseTerms {
    /// `x_1..x_{N+1}` (index `l-1`).
    pub levels: Vec<Rational>,
    /// `h_l = 1/l + ... + 1/l^(K-1)` (index `l-1`).
    pub harmonic: Vec<Rational>,
    pub bound: Rational,
}

fn assemble(files: usize, databases: usize, file_bits: usize, levels: Vec<Rational>) -> ConverseTerms {
    let harmonic: Vec<Rational> = (1..=databases + 1).map(|l| harmonic_tail(files, l)).collect();
    let bound = int(file_bits as i64)
        + levels
            .iter()
            .zip(&harmonic)
            .enumerate()
            .map(|(i, (x, h))| binomial_q(databases + 1, i + 1) * h * x)
            .sum::<Rational>();
    ConverseTerms {
        levels,
        harmonic,
        bound,
    }
}

/// Bound for one fixed realization. For uncoded caches the entropy of the
/// bits stored exactly on `S` is their count.
pub fn converse_bound_realization(partition: &StorageSetPartition) -> Result<ConverseTerms> {
    partition.check_cover()?;
    let files = partition.files();
    let databases = partition.databases();
    let mut counts = vec![0usize; databases + 1];
    for (set, entry) in partition.entries() {
        counts[set.len() - 1] += entry.total_bits();
    }
    let levels = counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            int(c as i64) / (int(files as i64) * binomial_q(databases + 1, i + 1))
        })
        .collect();
    Ok(assemble(files, databases, partition.file_bits(), levels))
}

/// The same bound written with conditional entropies for `K = 3`, `N = 2`:
///
/// `L + 4/27 sum_k H(W_k) + 11/108 sum_i sum_k H(W_k|Z_i)
///    + 17/54 sum_i sum_k H(W_k|Z_{[0:2]\i})`.
///
/// Uncoded storage makes each conditional entropy a count of bits missing
/// from the conditioning databases.
pub fn three_file_two_database_bound(partition: &StorageSetPartition) -> Result<Rational> {
    if partition.files() != 3 || partition.databases() != 2 {
        return Err(Error::InvalidArgument(format!(
            "specialized bound is for K=3, N=2 (got K={}, N={})",
            partition.files(),
            partition.databases()
        )));
    }
    partition.check_cover()?;
    let file_bits = partition.file_bits() as i64;
    // missing_from(A, k): bits of W_k stored on none of the databases in A.
    let missing_from = |conditioning: &[usize], file: usize| -> i64 {
        partition
            .entries()
            .iter()
            .filter(|(s, _)| conditioning.iter().all(|&d| !s.contains(d)))
            .map(|(_, e)| e.positions[file].len() as i64)
            .sum()
    };
    let mut singles = 0i64;
    let mut pairs = 0i64;
    for i in 0..3usize {
        let others: Vec<usize> = (0..3).filter(|&d| d != i).collect();
        for k in 0..3 {
            singles += missing_from(&[i], k);
            pairs += missing_from(&others, k);
        }
    }
    Ok(int(file_bits)
        + Rational::new(BigInt::from(4), BigInt::from(27)) * int(3 * file_bits)
        + Rational::new(BigInt::from(11), BigInt::from(108)) * int(singles)
        + Rational::new(BigInt::from(17), BigInt::from(54)) * int(pairs))
}

/// Per-bit caching probabilities `p_{j,i}` shared by every database.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarginalProfile {
    files: usize,
    file_bits: usize,
    p: Vec<Rational>,
}

impl MarginalProfile {
    pub fn new(files: usize, file_bits: usize, p: Vec<Rational>) -> Result<Self> {
        if p.len() != files * file_bits {
            return Err(Error::InvalidArgument(format!(
                "{} marginals for a {files}x{file_bits} store",
                p.len()
            )));
        }
        if p.iter().any(|v| *v < Rational::zero() || *v > Rational::one()) {
            return Err(Error::InvalidArgument(
                "marginal probability outside [0, 1]".into(),
            ));
        }
        Ok(MarginalProfile { files, file_bits, p })
    }

    pub fn uniform(files: usize, file_bits: usize, ratio: &StorageRatio) -> Self {
        MarginalProfile {
            files,
            file_bits,
            p: vec![ratio.value().clone(); files * file_bits],
        }
    }

    /// Exact conversion of floating-point marginals.
    pub fn from_f64(files: usize, file_bits: usize, p: &[f64]) -> Result<Self> {
        let p = p
            .iter()
            .map(|&v| {
                Rational::from_float(v)
                    .ok_or_else(|| Error::InvalidArgument(format!("non-finite marginal {v}")))
            })
            .collect::<Result<Vec<_>>>()?;
        MarginalProfile::new(files, file_bits, p)
    }

    pub fn files(&self) -> usize {
        self.files
    }

    pub fn file_bits(&self) -> usize {
        self.file_bits
    }

    pub fn get(&self, file: usize, position: usize) -> &Rational {
        &self.p[file * self.file_bits + position]
    }

    pub fn values(&self) -> &[Rational] {
        &self.p
    }

    pub fn total(&self) -> Rational {
        self.p.iter().sum()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.p.iter().map(crate::ratio::to_f64).collect()
    }
}

/// `a_l = h_l C(N, l-1) / K`: the expected bound is
/// `L + sum_{bits} sum_l a_l p^(l-1) (1-p)^(N+1-l)`.
pub fn expected_level_weights(files: usize, databases: usize) -> Vec<Rational> {
    (1..=databases + 1)
        .map(|l| harmonic_tail(files, l) * binomial_q(databases, l - 1) / int(files as i64))
        .collect()
}

/// Expected bound over placements with the given marginals.
///
/// `E[x_l] = C(N,l-1) / (K C(N+1,l)) * sum_bits p^(l-1) (1-p)^(N+1-l)`.
pub fn expected_converse_bound(
    marginals: &MarginalProfile,
    databases: usize,
    ratio: &StorageRatio,
) -> Result<ConverseTerms> {
    let files = marginals.files;
    let capacity = ratio.value() * int((files * marginals.file_bits) as i64);
    if marginals.total() > capacity {
        return Err(Error::InvalidArgument(format!(
            "marginals sum to {} above the budget {capacity}",
            marginals.total()
        )));
    }
    let mut multiplicity: HashMap<&Rational, i64> = HashMap::new();
    for v in &marginals.p {
        *multiplicity.entry(v).or_insert(0) += 1;
    }
    let levels = (1..=databases + 1)
        .map(|l| {
            let mass: Rational = multiplicity
                .iter()
                .map(|(&p, &count)| {
                    int(count) * pow(p, l - 1) * pow(&(Rational::one() - p), databases + 1 - l)
                })
                .sum();
            binomial_q(databases, l - 1) * mass
                / (int(files as i64) * binomial_q(databases + 1, l))
        })
        .collect();
    Ok(assemble(files, databases, marginals.file_bits, levels))
}
