//! Caching-phase placement policies.
//!
//! Every database draws its cache from the same distribution with its own
//! randomness and no coordination. The uniform policy is the decentralized
//! scheme; the deterministic policies exist to stress the converse bound.

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::seq::index;

use crate::analysis::MarginalProfile;
use crate::error::{Error, Result};
use crate::model::{BitAddress, CacheRealization};
use crate::ratio::StorageRatio;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlacementKind {
    /// Each database stores a uniformly random `floor(mu*K*L)`-subset.
    UniformRandom,
    /// Each database stores every bit of the listed files.
    WholeFilePrefix { files: Vec<usize> },
    /// Literal sets, one per database.
    ExplicitSets { sets: Vec<Vec<BitAddress>> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlacementPolicy {
    pub kind: PlacementKind,
    pub ratio: StorageRatio,
}

impl PlacementPolicy {
    pub fn uniform(ratio: StorageRatio) -> Self {
        PlacementPolicy {
            kind: PlacementKind::UniformRandom,
            ratio,
        }
    }

    pub fn whole_files(files: Vec<usize>, ratio: StorageRatio) -> Self {
        PlacementPolicy {
            kind: PlacementKind::WholeFilePrefix { files },
            ratio,
        }
    }

    pub fn explicit(sets: Vec<Vec<BitAddress>>, ratio: StorageRatio) -> Self {
        PlacementPolicy {
            kind: PlacementKind::ExplicitSets { sets },
            ratio,
        }
    }
}

/// Draws the caches of `databases` databases for a `files x file_bits` store.
pub fn sample_placement(
    policy: &PlacementPolicy,
    files: usize,
    file_bits: usize,
    databases: usize,
    seed: u64,
) -> Result<CacheRealization> {
    let budget = policy.ratio.budget(files, file_bits);
    let total = files * file_bits;
    match &policy.kind {
        PlacementKind::UniformRandom => {
            let mut rng = seed::rng(seed);
            let sets = (0..databases)
                .map(|_| {
                    let mut picked: Vec<usize> = index::sample(&mut rng, total, budget).into_vec();
                    picked.sort_unstable();
                    picked
                        .into_iter()
                        .map(|i| BitAddress::from_linear(i, file_bits))
                        .collect()
                })
                .collect();
            CacheRealization::new(budget, sets)
        }
        PlacementKind::WholeFilePrefix { files: cached } => {
            let mut cached = cached.clone();
            cached.sort_unstable();
            cached.dedup();
            if let Some(&bad) = cached.iter().find(|&&f| f >= files) {
                return Err(Error::InvalidArgument(format!(
                    "file {bad} out of range for K={files}"
                )));
            }
            if cached.len() * file_bits > budget {
                return Err(Error::BudgetViolation {
                    databases: (1..=databases).collect(),
                    budget,
                });
            }
            let set: Vec<BitAddress> = cached
                .iter()
                .flat_map(|&f| (0..file_bits).map(move |p| BitAddress::new(f, p)))
                .collect();
            CacheRealization::new(budget, vec![set; databases])
        }
        PlacementKind::ExplicitSets { sets } => {
            if sets.len() != databases {
                return Err(Error::InvalidArgument(format!(
                    "{} explicit sets given for N={databases}",
                    sets.len()
                )));
            }
            if let Some(a) = sets
                .iter()
                .flatten()
                .find(|a| a.file >= files || a.position >= file_bits)
            {
                return Err(Error::InvalidArgument(format!(
                    "address ({},{}) outside the {files}x{file_bits} store",
                    a.file, a.position
                )));
            }
            CacheRealization::new(budget, sets.clone())
        }
    }
}

/// `Ok` iff every `|H_d| <= floor(mu*K*L)`; otherwise names the offenders.
pub fn validate_budget(
    realization: &CacheRealization,
    ratio: &StorageRatio,
    files: usize,
    file_bits: usize,
) -> Result<()> {
    let budget = ratio.budget(files, file_bits);
    let over: Vec<usize> = realization
        .sets()
        .iter()
        .enumerate()
        .filter(|(_, s)| s.len() > budget)
        .map(|(i, _)| i + 1)
        .collect();
    if over.is_empty() {
        Ok(())
    } else {
        Err(Error::BudgetViolation {
            databases: over,
            budget,
        })
    }
}

/// Per-address frequency of inclusion in `H_1` over `trials` draws.
pub fn empirical_marginals(
    policy: &PlacementPolicy,
    files: usize,
    file_bits: usize,
    trials: usize,
    seed: u64,
) -> Result<MarginalProfile> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be >= 1".into()));
    }
    let databases = match &policy.kind {
        PlacementKind::ExplicitSets { sets } => sets.len().max(1),
        _ => 1,
    };
    let mut counts = vec![0u64; files * file_bits];
    for t in 0..trials {
        let r = sample_placement(policy, files, file_bits, databases, seed::derive(seed, t as u64))?;
        for a in r.set(1) {
            counts[a.linear(file_bits)] += 1;
        }
    }
    let denom = BigInt::from(trials);
    let p = counts
        .into_iter()
        .map(|c| BigRational::new(BigInt::from(c), denom.clone()))
        .collect();
    MarginalProfile::new(files, file_bits, p)
}
