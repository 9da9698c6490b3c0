//! Experiment plumbing behind the command line: configuration files, CSV
//! emission, parameter sweeps and the transcript-distribution privacy test.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::analysis::{capacity_decentralized, centralized_envelope};
use crate::error::{Error, Result};
use crate::model::BitAddress;
use crate::placement::{PlacementKind, PlacementPolicy};
use crate::protocol::{structural_privacy_histogram, Permutations, QueryPlan};
use crate::ratio::{self, to_f64, Rational, StorageRatio};
use crate::retrieval::{simulate_trials, SimulationConfig, SimulationSummary};
use crate::seed;

/// Placement policy as written in a config file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PolicySpec {
    UniformRandom,
    WholeFilePrefix { files: Vec<usize> },
    ExplicitSets { sets: Vec<Vec<BitAddress>> },
}

impl PolicySpec {
    pub fn with_ratio(&self, ratio: StorageRatio) -> PlacementPolicy {
        let kind = match self {
            PolicySpec::UniformRandom => PlacementKind::UniformRandom,
            PolicySpec::WholeFilePrefix { files } => PlacementKind::WholeFilePrefix {
                files: files.clone(),
            },
            PolicySpec::ExplicitSets { sets } => PlacementKind::ExplicitSets { sets: sets.clone() },
        };
        PlacementPolicy { kind, ratio }
    }
}

/// JSON experiment record. Every field is optional in the file; command-line
/// flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(rename = "K")]
    pub files: Option<usize>,
    #[serde(rename = "N")]
    pub databases: Option<usize>,
    /// Rational string such as `"1/3"` or `"0.5"`.
    pub mu: Option<String>,
    #[serde(rename = "L")]
    pub file_bits: Option<usize>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub policy: Option<PolicySpec>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::InvalidArgument(format!("config {}: {e}", path.display())))
    }

    /// `other`'s fields win where set.
    pub fn overlay(self, other: ExperimentConfig) -> ExperimentConfig {
        ExperimentConfig {
            files: other.files.or(self.files),
            databases: other.databases.or(self.databases),
            mu: other.mu.or(self.mu),
            file_bits: other.file_bits.or(self.file_bits),
            trials: other.trials.or(self.trials),
            seed: other.seed.or(self.seed),
            policy: other.policy.or(self.policy),
            out: other.out.or(self.out),
        }
    }

    pub fn ratio(&self) -> Result<StorageRatio> {
        self.mu
            .as_deref()
            .ok_or_else(|| missing("mu"))?
            .parse()
    }

    pub fn simulation(&self) -> Result<SimulationConfig> {
        let files = self.files.ok_or_else(|| missing("k"))?;
        let file_bits = self.file_bits.ok_or_else(|| missing("file-bits"))?;
        let trials = self.trials.unwrap_or(1);
        if files == 0 || file_bits == 0 || trials == 0 {
            return Err(Error::InvalidArgument(
                "K, L and trials must be positive".into(),
            ));
        }
        let policy = self.policy.clone().unwrap_or(PolicySpec::UniformRandom);
        Ok(SimulationConfig {
            files,
            databases: self.databases.ok_or_else(|| missing("n"))?,
            file_bits,
            policy: policy.with_ratio(self.ratio()?),
            trials,
            seed: self.seed.unwrap_or(0),
        })
    }
}

fn missing(name: &str) -> Error {
    Error::InvalidArgument(format!("missing required parameter --{name}"))
}

fn csv_error(e: csv::Error) -> Error {
    Error::InvalidArgument(format!("CSV output: {e}"))
}

/// `"p/q = d"` with six decimals.
pub fn format_exact(value: &Rational) -> String {
    format!("{value} = {:.6}", to_f64(value))
}

/// Per-trial rows followed by one `summary` row.
pub fn write_simulation_csv<W: Write>(
    summary: &SimulationSummary,
    config: &SimulationConfig,
    writer: W,
) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record([
        "trial",
        "theta",
        "total_D",
        "ideal_D",
        "D_over_L",
        "converse_bound",
        "seed",
        "mean",
        "std",
        "formula",
        "relative_gap",
    ])
    .map_err(csv_error)?;
    for t in &summary.trials {
        out.write_record([
            t.trial.to_string(),
            (t.desired + 1).to_string(),
            t.cost.total.to_string(),
            format!("{:.6}", t.cost.ideal_f64()),
            format!("{:.6}", t.cost.normalized()),
            format!("{:.6}", to_f64(&t.converse.bound)),
            t.seed.to_string(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
        ])
        .map_err(csv_error)?;
    }
    let formula = to_f64(&capacity_decentralized(
        config.files,
        config.databases,
        &config.policy.ratio,
    ));
    let mut row = vec![String::new(); 7];
    row[0] = "summary".into();
    row.extend([
        format!("{:.6}", summary.mean),
        format!("{:.6}", summary.std_dev),
        format!("{formula:.6}"),
        format!("{:.6}", (summary.mean - formula) / formula),
    ]);
    out.write_record(&row).map_err(csv_error)?;
    out.flush()
        .map_err(|e| Error::InvalidArgument(format!("CSV output: {e}")))
}

/// Swept parameter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sweep {
    /// Number of caching databases, inclusive range.
    Databases { from: usize, to: usize, ratio: StorageRatio },
    /// Storage ratio grid `from, from+step, ..., <= to`.
    Ratio {
        from: Rational,
        to: Rational,
        step: Rational,
        databases: usize,
    },
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub files: usize,
    pub sweep: Sweep,
    /// Add the centralized envelope column (ratio sweeps only).
    pub envelope: bool,
    /// Simulate at each point when set: `(file_bits, trials, seed)`.
    pub simulate: Option<(usize, usize, u64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub param: Rational,
    pub formula: Rational,
    pub envelope: Option<Rational>,
    pub simulated: Option<(f64, f64)>,
}

pub fn run_sweep(config: &SweepConfig) -> Result<Vec<SweepRow>> {
    let points: Vec<(Rational, usize, StorageRatio)> = match &config.sweep {
        Sweep::Databases { from, to, ratio } => {
            if from > to {
                return Err(Error::InvalidArgument(format!("empty range {from}..={to}")));
            }
            (*from..=*to)
                .map(|n| (ratio::int(n as i64), n, ratio.clone()))
                .collect()
        }
        Sweep::Ratio {
            from,
            to,
            step,
            databases,
        } => {
            if *step <= Rational::zero() || from > to {
                return Err(Error::InvalidArgument("invalid ratio grid".into()));
            }
            let mut points = Vec::new();
            let mut mu = from.clone();
            while mu <= *to {
                points.push((mu.clone(), *databases, StorageRatio::new(mu.clone())?));
                mu += step;
            }
            points
        }
    };
    let envelope = match (&config.sweep, config.envelope) {
        (Sweep::Ratio { databases, .. }, true) => Some(centralized_envelope(config.files, *databases)?),
        (Sweep::Databases { .. }, true) => {
            return Err(Error::InvalidArgument(
                "the envelope column needs a ratio sweep".into(),
            ))
        }
        _ => None,
    };

    points
        .into_iter()
        .map(|(param, databases, ratio)| {
            let formula = capacity_decentralized(config.files, databases, &ratio);
            let envelope = envelope
                .as_ref()
                .map(|e| e.evaluate(ratio.value()))
                .transpose()?;
            let simulated = match config.simulate {
                Some((file_bits, trials, seed)) => {
                    let s = simulate_trials(&SimulationConfig {
                        files: config.files,
                        databases,
                        file_bits,
                        policy: PlacementPolicy::uniform(ratio),
                        trials,
                        seed,
                    })?;
                    Some((s.mean, s.std_dev))
                }
                None => None,
            };
            Ok(SweepRow {
                param,
                formula,
                envelope,
                simulated,
            })
        })
        .collect()
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["param", "formula_cost", "envelope_cost", "sim_mean", "sim_std"])
        .map_err(csv_error)?;
    for r in rows {
        let (mean, std) = match r.simulated {
            Some((m, s)) => (format!("{m:.6}"), format!("{s:.6}")),
            None => (String::new(), String::new()),
        };
        out.write_record([
            format!("{:.6}", to_f64(&r.param)),
            format!("{:.6}", to_f64(&r.formula)),
            r.envelope
                .as_ref()
                .map(|e| format!("{:.6}", to_f64(e)))
                .unwrap_or_default(),
            mean,
            std,
        ])
        .map_err(csv_error)?;
    }
    out.flush()
        .map_err(|e| Error::InvalidArgument(format!("CSV output: {e}")))
}

/// Chi-square homogeneity test between two transcript samples.
#[derive(Debug, Clone, PartialEq)]
pub struct TranscriptComparison {
    /// Zero-based desired files being compared.
    pub desired: (usize, usize),
    pub replica: usize,
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrivacyReport {
    pub comparisons: Vec<TranscriptComparison>,
    pub structural_equal: bool,
    pub significance: f64,
}

impl PrivacyReport {
    pub fn min_p_value(&self) -> f64 {
        self.comparisons
            .iter()
            .map(|c| c.p_value)
            .fold(1.0, f64::min)
    }

    pub fn passed(&self) -> bool {
        self.structural_equal && self.comparisons.iter().all(|c| c.p_value > self.significance)
    }
}

#[derive(Debug, Clone)]
pub struct PrivacyTestConfig {
    pub files: usize,
    pub replicas: usize,
    pub length: usize,
    pub sessions: usize,
    pub seed: u64,
    pub permutations: Permutations,
    pub significance: f64,
}

/// Chi-square statistic and p-value for a `2 x C` table of counts.
pub fn chi_square_homogeneity(
    first: &HashMap<String, usize>,
    second: &HashMap<String, usize>,
) -> (f64, usize, f64) {
    let mut keys: Vec<&String> = first.keys().chain(second.keys()).collect();
    keys.sort();
    keys.dedup();
    let n1: usize = first.values().sum();
    let n2: usize = second.values().sum();
    let total = (n1 + n2) as f64;
    let mut statistic = 0.0;
    for k in &keys {
        let a = *first.get(*k).unwrap_or(&0) as f64;
        let b = *second.get(*k).unwrap_or(&0) as f64;
        let column = a + b;
        let ea = column * n1 as f64 / total;
        let eb = column * n2 as f64 / total;
        statistic += (a - ea).powi(2) / ea + (b - eb).powi(2) / eb;
    }
    let dof = keys.len().saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else {
        let dist = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
        1.0 - dist.cdf(statistic)
    };
    (statistic, dof, p_value)
}

/// Compares the per-database query distributions under every pair of
/// desired files, plus the exact structural histogram check.
pub fn privacy_test(config: &PrivacyTestConfig) -> Result<PrivacyReport> {
    let (k, n, len) = (config.files, config.replicas, config.length);
    if !(1..=3).contains(&k) || !(2..=3).contains(&n) || len == 0 || len > 2 * n.pow(k as u32) {
        return Err(Error::InvalidArgument(format!(
            "privacy test bins whole transcripts and needs K <= 3, 2 <= n <= 3, \
             lambda <= 2 n^K (got K={k}, n={n}, lambda={len}); use a smaller instance"
        )));
    }
    if config.sessions == 0 {
        return Err(Error::InvalidArgument("sessions must be >= 1".into()));
    }

    let mut samples: Vec<Vec<HashMap<String, usize>>> = vec![vec![HashMap::new(); n]; k];
    let mut histograms = Vec::with_capacity(k);
    for (theta, per_replica) in samples.iter_mut().enumerate() {
        for s in 0..config.sessions {
            let session_seed = seed::derive(config.seed, (theta * config.sessions + s) as u64);
            let plan = QueryPlan::build(n, k, theta, len, session_seed, config.permutations)?;
            if s == 0 {
                histograms.push(structural_privacy_histogram(&plan)?);
            }
            for (replica, counts) in per_replica.iter_mut().enumerate() {
                *counts.entry(plan.transcript(replica)).or_insert(0) += 1;
            }
        }
    }
    let structural_equal = histograms.windows(2).all(|w| w[0] == w[1]);

    let mut comparisons = Vec::new();
    for a in 0..k {
        for b in a + 1..k {
            for replica in 0..n {
                let (statistic, degrees_of_freedom, p_value) =
                    chi_square_homogeneity(&samples[a][replica], &samples[b][replica]);
                comparisons.push(TranscriptComparison {
                    desired: (a, b),
                    replica,
                    statistic,
                    degrees_of_freedom,
                    p_value,
                });
            }
        }
    }
    Ok(PrivacyReport {
        comparisons,
        structural_equal,
        significance: config.significance,
    })
}

/// Rows `(t, mu_t, D_t)` of the centralized corner points, plus whether each
/// corner lies on the lower envelope.
pub fn envelope_table(files: usize, databases: usize) -> Result<Vec<(usize, Rational, Rational, bool)>> {
    let e = centralized_envelope(files, databases)?;
    let on_hull: BTreeMap<&Rational, ()> = e.hull().iter().map(|(x, _)| (x, ())).collect();
    Ok(e
        .corners()
        .iter()
        .enumerate()
        .map(|(t, (x, y))| (t, x.clone(), y.clone(), on_hull.contains_key(x)))
        .collect())
}

/// Grid `0, step, 2 step, ..., 1`.
pub fn unit_grid(step: &Rational) -> Vec<Rational> {
    let mut out = Vec::new();
    let mut mu = Rational::zero();
    while mu <= Rational::one() {
        out.push(mu.clone());
        mu += step;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratio::frac;

    #[test]
    fn policy_spec_json() {
        let p: PolicySpec = serde_json::from_str(r#"{"kind":"whole-file-prefix","files":[0]}"#).unwrap();
        assert_eq!(p, PolicySpec::WholeFilePrefix { files: vec![0] });
        let p: PolicySpec =
            serde_json::from_str(r#"{"kind":"explicit-sets","sets":[[[0,1],[1,0]]]}"#).unwrap();
        assert_eq!(
            p,
            PolicySpec::ExplicitSets {
                sets: vec![vec![BitAddress::new(0, 1), BitAddress::new(1, 0)]]
            }
        );
    }

    #[test]
    fn flags_override_file() {
        let file = ExperimentConfig {
            files: Some(3),
            mu: Some("1/3".into()),
            seed: Some(1),
            ..Default::default()
        };
        let flags = ExperimentConfig {
            seed: Some(9),
            ..Default::default()
        };
        let merged = file.overlay(flags);
        assert_eq!(merged.files, Some(3));
        assert_eq!(merged.seed, Some(9));
        assert!(merged.simulation().is_err(), "N and L missing");
    }

    #[test]
    fn chi_square_identical_samples() {
        let a: HashMap<String, usize> = [("x".to_string(), 50), ("y".to_string(), 50)].into();
        let (stat, dof, p) = chi_square_homogeneity(&a, &a.clone());
        assert_eq!(stat, 0.0);
        assert_eq!(dof, 1);
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chi_square_disjoint_samples() {
        let a: HashMap<String, usize> = [("x".to_string(), 100)].into();
        let b: HashMap<String, usize> = [("y".to_string(), 100)].into();
        let (stat, _, p) = chi_square_homogeneity(&a, &b);
        assert!((stat - 200.0).abs() < 1e-9);
        assert!(p < 1e-10);
    }

    #[test]
    fn privacy_test_refuses_large_instances() {
        let config = PrivacyTestConfig {
            files: 4,
            replicas: 2,
            length: 16,
            sessions: 10,
            seed: 0,
            permutations: Permutations::Uniform,
            significance: 0.01,
        };
        assert!(privacy_test(&config).is_err());
    }

    #[test]
    fn grid_is_inclusive() {
        assert_eq!(unit_grid(&frac(1, 4)).len(), 5);
        assert_eq!(unit_grid(&frac(1, 20)).len(), 21);
    }

    #[test]
    fn envelope_needs_ratio_sweep() {
        let config = SweepConfig {
            files: 3,
            sweep: Sweep::Databases {
                from: 0,
                to: 2,
                ratio: StorageRatio::one(),
            },
            envelope: true,
            simulate: None,
        };
        assert!(run_sweep(&config).is_err());
    }
}
