//! End-to-end private retrieval over the data center plus caching databases.
//!
//! Bits are grouped by storage set; the replicated-database scheme runs
//! independently on each group over exactly the databases that hold it, and
//! the decoded pieces are put back at their original positions.

use std::collections::BTreeMap;

use num_traits::Zero;
use rayon::prelude::*;

use crate::analysis::{capacity_classical, converse_bound_realization, ConverseTerms};
use crate::error::{Error, Result};
use crate::model::{
    partition_by_storage_set, BitAddress, CacheRealization, FileStore, PartitionEntry,
    StorageSet,
};
use crate::placement::{sample_placement, PlacementPolicy};
use crate::protocol::{answer_queries, decode_desired, generate_query_plan, AnswerString, QueryPlan};
use crate::ratio::{int, to_f64, Rational};
use crate::seed;

const PARTITION_STREAM: u64 = 0x5041_5254;
const PLACEMENT_STREAM: u64 = 0x504c_4143;
const STORE_STREAM: u64 = 0x5354_4f52;
const RETRIEVAL_STREAM: u64 = 0x5245_5452;

/// Downloaded-bit accounting for one retrieval.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostReport {
    /// Bits downloaded from `DB_0..DB_N`.
    pub per_database: Vec<usize>,
    pub per_partition: BTreeMap<StorageSet, usize>,
    pub total: usize,
    /// Cost with padding overage removed: each group charged at its average
    /// per-file length.
    pub ideal: Rational,
    pub file_bits: usize,
}

impl CostReport {
    pub fn normalized(&self) -> f64 {
        self.total as f64 / self.file_bits as f64
    }

    pub fn ideal_f64(&self) -> f64 {
        to_f64(&self.ideal)
    }
}

/// What one storage-set group exchanged.
#[derive(Debug, Clone)]
pub struct PartitionTranscript {
    pub set: StorageSet,
    pub plan: QueryPlan,
    /// Answers in replica order, replica `r` being database `set.members()[r]`.
    pub answers: Vec<AnswerString>,
}

#[derive(Debug, Clone)]
pub struct Retrieval {
    pub recovered: Vec<u8>,
    pub cost: CostReport,
    pub transcripts: Vec<PartitionTranscript>,
}

/// A database's local view: it can only read bits it actually holds.
struct Database<'a> {
    index: usize,
    store: &'a FileStore,
    held: Option<Vec<bool>>,
}

impl<'a> Database<'a> {
    fn data_center(store: &'a FileStore) -> Self {
        Database {
            index: 0,
            store,
            held: None,
        }
    }

    fn cache(store: &'a FileStore, index: usize, set: &[BitAddress]) -> Self {
        let mut held = vec![false; store.files() * store.file_bits()];
        for a in set {
            held[a.linear(store.file_bits())] = true;
        }
        Database {
            index,
            store,
            held: Some(held),
        }
    }

    fn read(&self, address: BitAddress) -> Result<u8> {
        if let Some(held) = &self.held {
            if !held[address.linear(self.store.file_bits())] {
                return Err(Error::ProtocolViolation(format!(
                    "database {} asked for uncached bit ({},{})",
                    self.index, address.file, address.position
                )));
            }
        }
        Ok(self.store.bit(address))
    }

    /// Per-file symbol arrays for one group: stored bits in ascending
    /// position order, zeros beyond.
    fn padded_view(&self, entry: &PartitionEntry) -> Result<Vec<Vec<u8>>> {
        entry
            .positions
            .iter()
            .zip(&entry.padded_lengths)
            .enumerate()
            .map(|(file, (positions, &len))| {
                let mut symbols = vec![0u8; len];
                for (slot, &p) in symbols.iter_mut().zip(positions) {
                    *slot = self.read(BitAddress::new(file, p))?;
                }
                Ok(symbols)
            })
            .collect()
    }
}

/// Privately retrieves file `desired` and checks it against the store.
pub fn retrieve_file(
    store: &FileStore,
    realization: &CacheRealization,
    desired: usize,
    seed: u64,
) -> Result<Retrieval> {
    let files = store.files();
    let file_bits = store.file_bits();
    if desired >= files {
        return Err(Error::InvalidArgument(format!(
            "desired file {desired} out of range for K={files}"
        )));
    }
    let partition = partition_by_storage_set(realization, files, file_bits)?;
    let databases: Vec<Database> = std::iter::once(Database::data_center(store))
        .chain(
            (1..=realization.databases()).map(|d| Database::cache(store, d, realization.set(d))),
        )
        .collect();

    let mut recovered = vec![0u8; file_bits];
    let mut per_database = vec![0usize; realization.databases() + 1];
    let mut per_partition = BTreeMap::new();
    let mut ideal = Rational::zero();
    let mut transcripts = Vec::with_capacity(partition.entries().len());

    for (index, (set, entry)) in partition.entries().iter().enumerate() {
        let replicas = set.len();
        let plan = if replicas == 1 {
            QueryPlan::download_all(entry.raw_lengths(), desired)
        } else {
            generate_query_plan(
                replicas,
                files,
                desired,
                entry.padded_lengths[0],
                seed::child(seed, PARTITION_STREAM, index as u64),
            )?
        };

        let answers = set
            .members()
            .iter()
            .enumerate()
            .map(|(r, &d)| {
                let view = databases[d].padded_view(entry)?;
                answer_queries(plan.queries(r), &view)
            })
            .collect::<Result<Vec<_>>>()?;

        let decoded = decode_desired(&plan, &answers)?;
        for (&p, &bit) in entry.positions[desired].iter().zip(&decoded) {
            recovered[p] = bit;
        }

        let mut downloaded = 0;
        for (&d, a) in set.members().iter().zip(&answers) {
            per_database[d] += a.len();
            downloaded += a.len();
        }
        per_partition.insert(set.clone(), downloaded);
        ideal += if replicas == 1 {
            int(entry.total_bits() as i64)
        } else {
            int(entry.total_bits() as i64) / int(files as i64) * capacity_classical(files, replicas)
        };
        transcripts.push(PartitionTranscript {
            set: set.clone(),
            plan,
            answers,
        });
    }

    if recovered != store.file(desired) {
        return Err(Error::ReliabilityFailure(format!(
            "file {desired} decoded incorrectly"
        )));
    }
    let total = per_database.iter().sum();
    Ok(Retrieval {
        recovered,
        cost: CostReport {
            per_database,
            per_partition,
            total,
            ideal,
            file_bits,
        },
        transcripts,
    })
}

#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub files: usize,
    pub databases: usize,
    pub file_bits: usize,
    pub policy: PlacementPolicy,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub trial: usize,
    /// Zero-based desired file.
    pub desired: usize,
    pub seed: u64,
    pub cost: CostReport,
    pub converse: ConverseTerms,
}

#[derive(Debug, Clone)]
pub struct SimulationSummary {
    pub trials: Vec<TrialRecord>,
    /// Mean of `D/L` over trials.
    pub mean: f64,
    /// Sample standard deviation of `D/L`.
    pub std_dev: f64,
}

/// One independent (placement, retrieval) trial.
pub fn run_trial(config: &SimulationConfig, trial: usize) -> Result<TrialRecord> {
    let trial_seed = seed::derive(config.seed, trial as u64);
    let desired = trial % config.files;
    let store = FileStore::generate(
        config.files,
        config.file_bits,
        seed::child(trial_seed, STORE_STREAM, 0),
    )?;
    let realization = sample_placement(
        &config.policy,
        config.files,
        config.file_bits,
        config.databases,
        seed::child(trial_seed, PLACEMENT_STREAM, 0),
    )?;
    let retrieval = retrieve_file(
        &store,
        &realization,
        desired,
        seed::child(trial_seed, RETRIEVAL_STREAM, 0),
    )
    .map_err(|e| match e {
        Error::ReliabilityFailure(msg) => Error::ReliabilityFailure(format!("trial {trial}: {msg}")),
        other => other,
    })?;
    let partition = partition_by_storage_set(&realization, config.files, config.file_bits)?;
    let converse = converse_bound_realization(&partition)?;
    if int(retrieval.cost.total as i64) < converse.bound {
        return Err(Error::InvariantViolation(format!(
            "trial {trial}: downloaded {} bits, below the converse bound {}",
            retrieval.cost.total, converse.bound
        )));
    }
    Ok(TrialRecord {
        trial,
        desired,
        seed: trial_seed,
        cost: retrieval.cost,
        converse,
    })
}

/// Runs `config.trials` trials in parallel; records come back in trial order.
pub fn simulate_trials(config: &SimulationConfig) -> Result<SimulationSummary> {
    if config.trials == 0 {
        return Err(Error::InvalidArgument("trials must be >= 1".into()));
    }
    if config.files == 0 || config.file_bits == 0 {
        return Err(Error::InvalidArgument("K and L must be >= 1".into()));
    }
    let trials = (0..config.trials)
        .into_par_iter()
        .map(|t| run_trial(config, t))
        .collect::<Result<Vec<_>>>()?;
    let costs: Vec<f64> = trials.iter().map(|t| t.cost.normalized()).collect();
    let n = costs.len() as f64;
    let mean = costs.iter().sum::<f64>() / n;
    let std_dev = if costs.len() > 1 {
        (costs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(SimulationSummary {
        trials,
        mean,
        std_dev,
    })
}
