//! Ground-truth data model: the data center's files, bit addressing, cache
//! realizations and the storage-set partition.
//!
//! All indices are zero-based. Database `0` is the data center, which holds
//! every bit; databases `1..=N` hold the cached subsets `H_1..H_N`.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// The data center's `K` files of `L` bits each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileStore {
    files: usize,
    file_bits: usize,
    bits: Vec<u8>,
    seed: u64,
}

impl FileStore {
    /// Pseudo-random store, regenerable from `(files, file_bits, seed)`.
    pub fn generate(files: usize, file_bits: usize, seed: u64) -> Result<Self> {
        if files == 0 || file_bits == 0 {
            return Err(Error::InvalidArgument(format!(
                "file store needs K >= 1 and L >= 1 (got K={files}, L={file_bits})"
            )));
        }
        let mut rng = seed::rng(seed);
        let bits = (0..files * file_bits)
            .map(|_| rng.random::<bool>() as u8)
            .collect();
        Ok(FileStore {
            files,
            file_bits,
            bits,
            seed,
        })
    }

    /// Store with explicit contents, one `Vec` per file. Every file must have
    /// the same non-zero length and contain only 0/1 symbols.
    pub fn from_files(files: &[Vec<u8>]) -> Result<Self> {
        let file_bits = files.first().map(Vec::len).unwrap_or(0);
        if files.is_empty() || file_bits == 0 {
            return Err(Error::InvalidArgument("empty file store".into()));
        }
        if files.iter().any(|f| f.len() != file_bits) {
            return Err(Error::InvalidArgument("files differ in length".into()));
        }
        if files.iter().flatten().any(|&b| b > 1) {
            return Err(Error::InvalidArgument("file symbols must be 0 or 1".into()));
        }
        Ok(FileStore {
            files: files.len(),
            file_bits,
            bits: files.concat(),
            seed: 0,
        })
    }

    pub fn files(&self) -> usize {
        self.files
    }

    pub fn file_bits(&self) -> usize {
        self.file_bits
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn file(&self, file: usize) -> &[u8] {
        &self.bits[file * self.file_bits..(file + 1) * self.file_bits]
    }

    pub fn bit(&self, address: BitAddress) -> u8 {
        self.bits[address.file * self.file_bits + address.position]
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.bits
    }
}

/// Position `position` of file `file`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "(usize, usize)", into = "(usize, usize)")]
pub struct BitAddress {
    pub file: usize,
    pub position: usize,
}

impl BitAddress {
    pub fn new(file: usize, position: usize) -> Self {
        BitAddress { file, position }
    }

    /// Row-major index into a `K x L` array.
    pub fn linear(self, file_bits: usize) -> usize {
        self.file * file_bits + self.position
    }

    pub fn from_linear(index: usize, file_bits: usize) -> Self {
        BitAddress {
            file: index / file_bits,
            position: index % file_bits,
        }
    }
}

impl From<(usize, usize)> for BitAddress {
    fn from((file, position): (usize, usize)) -> Self {
        BitAddress { file, position }
    }
}

impl From<BitAddress> for (usize, usize) {
    fn from(a: BitAddress) -> Self {
        (a.file, a.position)
    }
}

/// Contents of the `N` caching databases after the caching phase.
///
/// `sets[d - 1]` is `H_d`, kept sorted. The data center is implicit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheRealization {
    #[serde(rename = "N")]
    databases: usize,
    budget: usize,
    sets: Vec<Vec<BitAddress>>,
}

impl CacheRealization {
    /// Builds a realization, rejecting duplicate addresses and sets larger
    /// than `budget`.
    pub fn new(budget: usize, mut sets: Vec<Vec<BitAddress>>) -> Result<Self> {
        for (i, set) in sets.iter_mut().enumerate() {
            set.sort_unstable();
            if set.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidArgument(format!(
                    "database {} lists an address twice",
                    i + 1
                )));
            }
        }
        let over: Vec<usize> = sets
            .iter()
            .enumerate()
            .filter(|(_, s)| s.len() > budget)
            .map(|(i, _)| i + 1)
            .collect();
        if !over.is_empty() {
            return Err(Error::BudgetViolation {
                databases: over,
                budget,
            });
        }
        Ok(CacheRealization {
            databases: sets.len(),
            budget,
            sets,
        })
    }

    /// Number of caching databases `N` (the data center is not counted).
    pub fn databases(&self) -> usize {
        self.databases
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    /// `H_d` for `d` in `1..=N`.
    pub fn set(&self, database: usize) -> &[BitAddress] {
        &self.sets[database - 1]
    }

    pub fn sets(&self) -> &[Vec<BitAddress>] {
        &self.sets
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("realization serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            #[serde(rename = "N")]
            databases: usize,
            budget: usize,
            sets: Vec<Vec<BitAddress>>,
        }
        let raw: Raw = serde_json::from_str(text)
            .map_err(|e| Error::InvalidArgument(format!("realization JSON: {e}")))?;
        if raw.databases != raw.sets.len() {
            return Err(Error::InvalidArgument(format!(
                "N = {} but {} sets given",
                raw.databases,
                raw.sets.len()
            )));
        }
        CacheRealization::new(raw.budget, raw.sets)
    }
}

/// Sorted set of database indices, always containing the data center `0`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StorageSet(Vec<usize>);

impl StorageSet {
    pub fn new(mut members: Vec<usize>) -> Result<Self> {
        members.sort_unstable();
        members.dedup();
        if members.first() != Some(&0) {
            return Err(Error::InvalidArgument(
                "storage set must contain the data center".into(),
            ));
        }
        Ok(StorageSet(members))
    }

    pub fn members(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, database: usize) -> bool {
        self.0.binary_search(&database).is_ok()
    }
}

impl fmt::Display for StorageSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{d}")?;
        }
        write!(f, "}}")
    }
}

/// Bits whose storage set is exactly one `S`, grouped by file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionEntry {
    /// Ascending positions per file.
    pub positions: Vec<Vec<usize>>,
    /// Per-file symbol-array lengths the retrieval scheme runs on.
    pub padded_lengths: Vec<usize>,
}

impl PartitionEntry {
    pub fn raw_lengths(&self) -> Vec<usize> {
        self.positions.iter().map(Vec::len).collect()
    }

    pub fn total_bits(&self) -> usize {
        self.positions.iter().map(Vec::len).sum()
    }

    pub fn max_raw_length(&self) -> usize {
        self.positions.iter().map(Vec::len).max().unwrap_or(0)
    }
}

/// The subfiles `W_{j,S}`: a disjoint cover of all `K*L` addresses keyed by
/// storage set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StorageSetPartition {
    files: usize,
    file_bits: usize,
    databases: usize,
    entries: BTreeMap<StorageSet, PartitionEntry>,
}

impl StorageSetPartition {
    pub fn files(&self) -> usize {
        self.files
    }

    pub fn file_bits(&self) -> usize {
        self.file_bits
    }

    pub fn databases(&self) -> usize {
        self.databases
    }

    pub fn entries(&self) -> &BTreeMap<StorageSet, PartitionEntry> {
        &self.entries
    }

    pub fn entry(&self, set: &StorageSet) -> Option<&PartitionEntry> {
        self.entries.get(set)
    }

    /// Total bits (over all files) whose storage set is exactly `set`.
    pub fn bit_count(&self, set: &StorageSet) -> usize {
        self.entries.get(set).map_or(0, PartitionEntry::total_bits)
    }

    /// Checks that the entries form a disjoint cover of all addresses.
    pub fn check_cover(&self) -> Result<()> {
        let mut seen = vec![false; self.files * self.file_bits];
        for (set, entry) in &self.entries {
            if entry.positions.len() != self.files {
                return Err(Error::InvalidArgument(format!(
                    "entry {set} has {} file lists, expected {}",
                    entry.positions.len(),
                    self.files
                )));
            }
            for (file, positions) in entry.positions.iter().enumerate() {
                for &p in positions {
                    if p >= self.file_bits {
                        return Err(Error::InvalidArgument(format!(
                            "entry {set} lists position {p} beyond L"
                        )));
                    }
                    let slot = &mut seen[file * self.file_bits + p];
                    if *slot {
                        return Err(Error::InvalidArgument(format!(
                            "address ({file},{p}) appears in more than one entry"
                        )));
                    }
                    *slot = true;
                }
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            let a = BitAddress::from_linear(missing, self.file_bits);
            return Err(Error::InvalidArgument(format!(
                "address ({},{}) is not covered",
                a.file, a.position
            )));
        }
        Ok(())
    }
}

/// Smallest multiple of `block` that is `>= length`.
pub fn round_up(length: usize, block: usize) -> usize {
    length.div_ceil(block) * block
}

/// Block size `n^K` of the replicated-database scheme, `None` on overflow.
pub fn block_size(replicas: usize, files: usize) -> Option<usize> {
    u32::try_from(files)
        .ok()
        .and_then(|k| replicas.checked_pow(k))
}

/// Groups every address by the exact set of nodes that store it.
pub fn partition_by_storage_set(
    realization: &CacheRealization,
    files: usize,
    file_bits: usize,
) -> Result<StorageSetPartition> {
    let total = files * file_bits;
    let databases = realization.databases();
    if databases >= 64 {
        return Err(Error::InvalidArgument(format!(
            "at most 63 caching databases supported (got {databases})"
        )));
    }
    // Bit d of mask[a] set iff address a is in H_d; bit 0 is the data center.
    let mut mask = vec![1u64; total];
    for (i, set) in realization.sets().iter().enumerate() {
        for &address in set {
            if address.file >= files || address.position >= file_bits {
                return Err(Error::InvalidArgument(format!(
                    "database {} caches ({},{}) outside the {files}x{file_bits} store",
                    i + 1,
                    address.file,
                    address.position
                )));
            }
            mask[address.linear(file_bits)] |= 1 << (i + 1);
        }
    }

    let mut grouped: BTreeMap<u64, Vec<Vec<usize>>> = BTreeMap::new();
    for (index, &m) in mask.iter().enumerate() {
        let a = BitAddress::from_linear(index, file_bits);
        grouped.entry(m).or_insert_with(|| vec![Vec::new(); files])[a.file].push(a.position);
    }

    let mut entries = BTreeMap::new();
    for (m, positions) in grouped {
        let members: Vec<usize> = (0..=databases).filter(|d| m & (1 << d) != 0).collect();
        let set = StorageSet(members);
        let padded_lengths = if set.len() == 1 {
            positions.iter().map(Vec::len).collect()
        } else {
            let block = block_size(set.len(), files).ok_or_else(|| {
                Error::InvalidArgument(format!("block size {}^{files} overflows", set.len()))
            })?;
            let max = positions.iter().map(Vec::len).max().unwrap_or(0);
            vec![round_up(max, block); files]
        };
        entries.insert(
            set,
            PartitionEntry {
                positions,
                padded_lengths,
            },
        );
    }

    Ok(StorageSetPartition {
        files,
        file_bits,
        databases,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_addresses(files: usize, file_bits: usize) -> Vec<BitAddress> {
        (0..files * file_bits)
            .map(|i| BitAddress::from_linear(i, file_bits))
            .collect()
    }

    #[test]
    fn store_is_deterministic() {
        let a = FileStore::generate(1, 1, 99).unwrap();
        let b = FileStore::generate(1, 1, 99).unwrap();
        assert_eq!(a, b);
        assert_eq!(FileStore::generate(3, 8, 5).unwrap().as_slice().len(), 24);
    }

    #[test]
    fn store_rejects_empty_dimensions() {
        assert!(matches!(
            FileStore::generate(0, 4, 1),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            FileStore::generate(2, 0, 1),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn distinct_seeds_almost_always_differ() {
        // P(equal) = 2^-24 per pair for K=3, L=8.
        let stores: Vec<_> = (0..200u64)
            .map(|s| FileStore::generate(3, 8, s).unwrap())
            .collect();
        let equal_pairs = stores
            .windows(2)
            .filter(|w| w[0].as_slice() == w[1].as_slice())
            .count();
        assert_eq!(equal_pairs, 0);
    }

    #[test]
    fn realization_rejects_duplicates_and_overflow() {
        let dup = vec![vec![BitAddress::new(0, 1), BitAddress::new(0, 1)]];
        assert!(matches!(
            CacheRealization::new(4, dup),
            Err(Error::InvalidArgument(_))
        ));
        let big = vec![vec![], all_addresses(1, 3)];
        assert_eq!(
            CacheRealization::new(2, big),
            Err(Error::BudgetViolation {
                databases: vec![2],
                budget: 2
            })
        );
    }

    #[test]
    fn full_replication_is_one_entry() {
        let r = CacheRealization::new(6, vec![all_addresses(2, 3); 3]).unwrap();
        let p = partition_by_storage_set(&r, 2, 3).unwrap();
        assert_eq!(p.entries().len(), 1);
        let (set, entry) = p.entries().iter().next().unwrap();
        assert_eq!(set.members(), &[0, 1, 2, 3]);
        assert_eq!(entry.raw_lengths(), vec![3, 3]);
        assert_eq!(entry.padded_lengths, vec![16, 16]);
        p.check_cover().unwrap();
    }

    #[test]
    fn empty_caches_leave_everything_at_the_data_center() {
        let r = CacheRealization::new(0, vec![vec![]; 2]).unwrap();
        let p = partition_by_storage_set(&r, 3, 5).unwrap();
        assert_eq!(p.entries().len(), 1);
        let entry = p.entry(&StorageSet::new(vec![0]).unwrap()).unwrap();
        assert_eq!(entry.raw_lengths(), vec![5, 5, 5]);
        assert_eq!(entry.padded_lengths, vec![5, 5, 5]);
    }

    #[test]
    fn membership_is_exact_on_small_instance() {
        let h1 = vec![BitAddress::new(0, 0), BitAddress::new(1, 1)];
        let h2 = vec![BitAddress::new(0, 0), BitAddress::new(0, 1)];
        let r = CacheRealization::new(2, vec![h1.clone(), h2.clone()]).unwrap();
        let p = partition_by_storage_set(&r, 2, 2).unwrap();
        p.check_cover().unwrap();
        for (set, entry) in p.entries() {
            for (file, positions) in entry.positions.iter().enumerate() {
                for &pos in positions {
                    let a = BitAddress::new(file, pos);
                    assert_eq!(h1.contains(&a), set.contains(1));
                    assert_eq!(h2.contains(&a), set.contains(2));
                }
            }
        }
        let both = p.entry(&StorageSet::new(vec![0, 1, 2]).unwrap()).unwrap();
        assert_eq!(both.raw_lengths(), vec![1, 0]);
        assert_eq!(both.padded_lengths, vec![9, 9]);
    }

    #[test]
    fn out_of_range_cache_is_rejected() {
        let r = CacheRealization::new(1, vec![vec![BitAddress::new(2, 0)]]).unwrap();
        assert!(partition_by_storage_set(&r, 2, 4).is_err());
    }

    #[test]
    fn json_round_trip_uses_pairs() {
        let r = CacheRealization::new(2, vec![vec![BitAddress::new(1, 0)], vec![]]).unwrap();
        let text = r.to_json();
        assert_eq!(text, r#"{"N":2,"budget":2,"sets":[[[1,0]],[]]}"#);
        assert_eq!(CacheRealization::from_json(&text).unwrap(), r);
        assert!(CacheRealization::from_json(r#"{"N":3,"budget":2,"sets":[]}"#).is_err());
    }

    #[test]
    fn storage_set_requires_data_center() {
        assert!(StorageSet::new(vec![1, 2]).is_err());
        assert_eq!(StorageSet::new(vec![2, 0, 2]).unwrap().to_string(), "{0,2}");
    }

    #[test]
    fn round_up_matches_block_rule() {
        assert_eq!(round_up(1, 8), 8);
        assert_eq!(round_up(8, 8), 8);
        assert_eq!(round_up(9, 8), 16);
        assert_eq!(block_size(3, 3), Some(27));
    }
}
