//! Capacity-achieving PIR over `n` replicated databases.
//!
//! Each file is a symbol array of length `lambda`, processed in blocks of
//! `n^K` symbols. Within a block the user asks every database for one fresh
//! symbol of every file, then for `k = 2..K` combines each purely-undesired
//! `(k-1)`-sum downloaded from the *other* databases with a fresh desired
//! symbol, and balances every undesired `k`-subset with `(n-1)^(k-1)` fresh
//! undesired sums. Per-file uniform permutations hide which positions belong
//! to the desired file, so every database sees the same query structure
//! regardless of the requested index.
//!
//! With `n = 1` the scheme degenerates to downloading every symbol.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::model::block_size;
use crate::seed;

/// GF(2) sum of one symbol from each of `k` distinct files.
///
/// Terms are `(file, position)` pairs sorted by file; positions are the
/// post-permutation indices a database sees.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SumQuery {
    terms: Vec<(usize, usize)>,
}

impl SumQuery {
    pub fn new(mut terms: Vec<(usize, usize)>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidArgument("empty sum query".into()));
        }
        terms.sort_unstable();
        if terms.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidArgument(
                "sum query repeats a file".into(),
            ));
        }
        Ok(SumQuery { terms })
    }

    pub fn order(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> &[(usize, usize)] {
        &self.terms
    }

    pub fn files(&self) -> Vec<usize> {
        self.terms.iter().map(|t| t.0).collect()
    }

    pub fn involves(&self, file: usize) -> bool {
        self.terms.iter().any(|t| t.0 == file)
    }

    fn with_term(&self, term: (usize, usize)) -> SumQuery {
        let mut terms = self.terms.clone();
        terms.push(term);
        terms.sort_unstable();
        SumQuery { terms }
    }
}

/// One bit per query, in query order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AnswerString(pub Vec<u8>);

impl AnswerString {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Reference to a previously issued query: `(replica, query index)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueryRef {
    pub replica: usize,
    pub query: usize,
}

/// How a desired-file query is decoded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DesiredSlot {
    /// Position of the desired symbol in the desired file's array.
    pub position: usize,
    /// Undesired sum whose answer cancels the interference, if any.
    pub side_info: Option<QueryRef>,
}

/// Whether per-file permutations are drawn. `Identity` exists only as a
/// negative control for the privacy tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Permutations {
    Uniform,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryPlan {
    replicas: usize,
    files: usize,
    desired: usize,
    lengths: Vec<usize>,
    permutations: Vec<Vec<usize>>,
    queries: Vec<Vec<SumQuery>>,
    slots: Vec<Vec<Option<DesiredSlot>>>,
}

/// Plan for retrieving file `desired` from `replicas` databases holding `K`
/// files of `length` symbols each.
pub fn generate_query_plan(
    replicas: usize,
    files: usize,
    desired: usize,
    length: usize,
    seed: u64,
) -> Result<QueryPlan> {
    QueryPlan::build(replicas, files, desired, length, seed, Permutations::Uniform)
}

impl QueryPlan {
    pub fn build(
        replicas: usize,
        files: usize,
        desired: usize,
        length: usize,
        seed: u64,
        permutations: Permutations,
    ) -> Result<QueryPlan> {
        if replicas == 0 || files == 0 {
            return Err(Error::InvalidArgument(format!(
                "need n >= 1 and K >= 1 (got n={replicas}, K={files})"
            )));
        }
        if desired >= files {
            return Err(Error::InvalidArgument(format!(
                "desired file {desired} out of range for K={files}"
            )));
        }
        if replicas == 1 {
            return Ok(QueryPlan::download_all(vec![length; files], desired));
        }
        let block = block_size(replicas, files).ok_or_else(|| {
            Error::InvalidArgument(format!("block size {replicas}^{files} overflows"))
        })?;
        if length % block != 0 {
            return Err(Error::InvalidLength {
                length,
                block,
                replicas,
            });
        }

        let mut rng = seed::rng(seed);
        let perms: Vec<Vec<usize>> = (0..files)
            .map(|_| {
                let mut p: Vec<usize> = (0..length).collect();
                if permutations == Permutations::Uniform {
                    p.shuffle(&mut rng);
                }
                p
            })
            .collect();

        let mut plan = QueryPlan {
            replicas,
            files,
            desired,
            lengths: vec![length; files],
            permutations: perms,
            queries: vec![Vec::new(); replicas],
            slots: vec![Vec::new(); replicas],
        };
        for b in 0..length / block {
            plan.push_block(b * block);
        }
        Ok(plan)
    }

    /// Single-replica plan: request every symbol of every file.
    pub fn download_all(lengths: Vec<usize>, desired: usize) -> QueryPlan {
        let mut queries = Vec::new();
        let mut slots = Vec::new();
        for (file, &len) in lengths.iter().enumerate() {
            for position in 0..len {
                queries.push(SumQuery {
                    terms: vec![(file, position)],
                });
                slots.push((file == desired).then_some(DesiredSlot {
                    position,
                    side_info: None,
                }));
            }
        }
        QueryPlan {
            replicas: 1,
            files: lengths.len(),
            desired,
            permutations: lengths.iter().map(|&l| (0..l).collect()).collect(),
            lengths,
            queries: vec![queries],
            slots: vec![slots],
        }
    }

    fn push_block(&mut self, base: usize) {
        let n = self.replicas;
        let theta = self.desired;
        let undesired: Vec<usize> = (0..self.files).filter(|&f| f != theta).collect();
        let mut counters = vec![base; self.files];

        // Round 1: one fresh singleton per file at every database.
        let mut previous: Vec<Vec<usize>> = vec![Vec::new(); n];
        for d in 0..n {
            for file in 0..self.files {
                let position = self.fresh(&mut counters, file);
                let q = self.push(d, SumQuery { terms: vec![(file, position)] });
                if file == theta {
                    self.slots[d][q] = Some(DesiredSlot {
                        position,
                        side_info: None,
                    });
                } else {
                    previous[d].push(q);
                }
            }
        }

        for k in 2..=self.files {
            let mut current: Vec<Vec<usize>> = vec![Vec::new(); n];
            for d in 0..n {
                for other in (0..n).filter(|&o| o != d) {
                    for &q in &previous[other] {
                        let position = self.fresh(&mut counters, theta);
                        let query = self.queries[other][q].with_term((theta, position));
                        let r = self.push(d, query);
                        self.slots[d][r] = Some(DesiredSlot {
                            position,
                            side_info: Some(QueryRef {
                                replica: other,
                                query: q,
                            }),
                        });
                    }
                }
                let repeats = (n - 1).pow(k as u32 - 1);
                for subset in k_subsets(&undesired, k) {
                    for _ in 0..repeats {
                        let terms = subset
                            .iter()
                            .map(|&f| (f, self.fresh(&mut counters, f)))
                            .collect();
                        let r = self.push(d, SumQuery { terms });
                        current[d].push(r);
                    }
                }
            }
            previous = current;
        }
    }

    fn fresh(&self, counters: &mut [usize], file: usize) -> usize {
        let position = self.permutations[file][counters[file]];
        counters[file] += 1;
        position
    }

    fn push(&mut self, replica: usize, query: SumQuery) -> usize {
        self.queries[replica].push(query);
        self.slots[replica].push(None);
        self.queries[replica].len() - 1
    }

    pub fn replicas(&self) -> usize {
        self.replicas
    }

    pub fn files(&self) -> usize {
        self.files
    }

    pub fn desired(&self) -> usize {
        self.desired
    }

    /// Symbol-array length per file.
    pub fn lengths(&self) -> &[usize] {
        &self.lengths
    }

    pub fn permutation(&self, file: usize) -> &[usize] {
        &self.permutations[file]
    }

    pub fn queries(&self, replica: usize) -> &[SumQuery] {
        &self.queries[replica]
    }

    pub fn desired_slots(&self, replica: usize) -> &[Option<DesiredSlot>] {
        &self.slots[replica]
    }

    pub fn total_queries(&self) -> usize {
        self.queries.iter().map(Vec::len).sum()
    }

    /// Desired symbols decodable from the answers of `replica`.
    pub fn desired_count(&self, replica: usize) -> usize {
        self.slots[replica].iter().flatten().count()
    }

    /// Canonical transcript of what `replica` receives: one query per line,
    /// terms as sorted `(file,position)` pairs.
    pub fn transcript(&self, replica: usize) -> String {
        let mut out = String::new();
        for q in &self.queries[replica] {
            for (i, (f, p)) in q.terms.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "({f},{p})");
            }
            out.push('\n');
        }
        out
    }
}

/// All `k`-subsets of `items` in lexicographic order.
fn k_subsets(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    fn go(items: &[usize], k: usize, start: usize, acc: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if acc.len() == k {
            out.push(acc.clone());
            return;
        }
        for i in start..items.len() {
            acc.push(items[i]);
            go(items, k, i + 1, acc, out);
            acc.pop();
        }
    }
    let mut out = Vec::new();
    if k <= items.len() {
        go(items, k, 0, &mut Vec::with_capacity(k), &mut out);
    }
    out
}

/// Database side: XOR of the referenced symbols for every query.
///
/// `symbols[f]` is the database's (zero-padded) array for file `f`.
pub fn answer_queries(queries: &[SumQuery], symbols: &[Vec<u8>]) -> Result<AnswerString> {
    queries
        .iter()
        .map(|q| {
            q.terms.iter().try_fold(0u8, |acc, &(f, p)| {
                symbols
                    .get(f)
                    .and_then(|s| s.get(p))
                    .map(|&bit| acc ^ (bit & 1))
                    .ok_or_else(|| {
                        Error::ProtocolViolation(format!("query references unknown symbol ({f},{p})"))
                    })
            })
        })
        .collect::<Result<Vec<u8>>>()
        .map(AnswerString)
}

/// Recovers the desired file's symbol array from all replicas' answers.
pub fn decode_desired(plan: &QueryPlan, answers: &[AnswerString]) -> Result<Vec<u8>> {
    if answers.len() != plan.replicas {
        return Err(Error::ProtocolViolation(format!(
            "expected answers from {} databases, got {}",
            plan.replicas,
            answers.len()
        )));
    }
    for (d, a) in answers.iter().enumerate() {
        if a.len() != plan.queries[d].len() {
            return Err(Error::ProtocolViolation(format!(
                "database {d} answered {} of {} queries",
                a.len(),
                plan.queries[d].len()
            )));
        }
    }
    let length = plan.lengths[plan.desired];
    let mut out = vec![0u8; length];
    let mut filled = vec![false; length];
    for (d, slots) in plan.slots.iter().enumerate() {
        for (r, slot) in slots.iter().enumerate() {
            let Some(slot) = slot else { continue };
            let mut bit = answers[d].0[r];
            if let Some(link) = slot.side_info {
                let side = answers
                    .get(link.replica)
                    .and_then(|a| a.0.get(link.query))
                    .ok_or_else(|| {
                        Error::ProtocolViolation(format!(
                            "missing side information ({}, {})",
                            link.replica, link.query
                        ))
                    })?;
                bit ^= side;
            }
            out[slot.position] = bit;
            filled[slot.position] = true;
        }
    }
    if let Some(missing) = filled.iter().position(|f| !f) {
        return Err(Error::ProtocolViolation(format!(
            "desired symbol {missing} never requested"
        )));
    }
    Ok(out)
}

/// `(order, file set)` of a query.
pub type QueryShape = (usize, Vec<usize>);

/// Per-replica counts of queries by exact file set.
pub fn structural_privacy_histogram(plan: &QueryPlan) -> Result<Vec<BTreeMap<QueryShape, usize>>> {
    if plan.replicas < 2 {
        return Err(Error::InvalidArgument(
            "structural histogram needs n >= 2".into(),
        ));
    }
    Ok(plan
        .queries
        .iter()
        .map(|qs| {
            let mut h = BTreeMap::new();
            for q in qs {
                *h.entry((q.order(), q.files())).or_insert(0) += 1;
            }
            h
        })
        .collect())
}
