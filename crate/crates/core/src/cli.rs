//! `cachepir` command line.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 invariant
//! violation (reliability, converse dominance, budget, privacy).

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::analysis::{
    capacity_classical, capacity_decentralized, centralized_envelope, converse_bound_realization,
    expected_converse_bound, minimize_expected_bound, BoundObjective, MarginalProfile,
    OptimizerConfig,
};
use crate::error::{Error, Result};
use crate::harness::{
    envelope_table, format_exact, privacy_test, run_sweep, write_simulation_csv, write_sweep_csv,
    ExperimentConfig, PolicySpec, PrivacyTestConfig, Sweep, SweepConfig,
};
use crate::model::partition_by_storage_set;
use crate::placement::sample_placement;
use crate::protocol::Permutations;
use crate::ratio::{self, to_f64, StorageRatio};
use crate::retrieval::simulate_trials;
use crate::seed;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VIOLATION: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "cachepir",
    version,
    about = "Private retrieval from decentralized uncoded caches: capacity, simulation and converse tools"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Default, Args)]
struct Common {
    /// Number of files K.
    #[arg(long = "k")]
    files: Option<usize>,
    /// Number of caching databases N (replicas n for `classical` and `privacy-test`).
    #[arg(long = "n")]
    databases: Option<usize>,
    /// Storage ratio as a fraction ("1/3") or terminating decimal ("0.5").
    #[arg(long)]
    mu: Option<String>,
    /// Bits per file L.
    #[arg(long = "file-bits")]
    file_bits: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// JSON experiment config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Normalized download cost with uniform decentralized caching.
    Capacity(#[command(flatten)] Common),
    /// Classical replicated-database cost 1 + 1/n + ... + 1/n^(K-1).
    Classical(#[command(flatten)] Common),
    /// Centralized-placement corner points and lower convex envelope.
    Envelope {
        #[command(flatten)]
        common: Common,
        /// Evaluate the envelope at this storage ratio.
        #[arg(long)]
        at: Option<String>,
    },
    /// Monte Carlo placement + retrieval trials, one CSV row per trial.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// uniform-random or whole-file-prefix.
        #[arg(long)]
        policy: Option<String>,
        /// 1-based files cached by whole-file-prefix, comma separated.
        #[arg(long = "cache-files", value_delimiter = ',')]
        cache_files: Vec<usize>,
    },
    /// Formula (and optionally simulated) cost across N or mu.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Swept parameter: `n` or `mu`.
        #[arg(long)]
        vary: String,
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        /// Grid step for `--vary mu`.
        #[arg(long, default_value = "1/20")]
        step: String,
        /// Add the centralized envelope column (`--vary mu` only).
        #[arg(long)]
        envelope: bool,
    },
    /// Converse bound per sampled realization and in expectation.
    Converse(#[command(flatten)] Common),
    /// Minimize the expected converse bound over per-bit marginals.
    Optimize {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 20)]
        restarts: usize,
        /// Minimize E[x_l] for a single level instead of the full bound.
        #[arg(long)]
        level: Option<usize>,
    },
    /// Chi-square test of query transcripts across desired files.
    PrivacyTest {
        #[command(flatten)]
        common: Common,
        /// Subfile length lambda.
        #[arg(long, default_value_t = 4)]
        length: usize,
        #[arg(long, default_value_t = 10_000)]
        sessions: usize,
        #[arg(long, default_value_t = 0.01)]
        alpha: f64,
        /// Negative control: skip the per-file permutations.
        #[arg(long)]
        no_permute: bool,
    },
}

fn experiment(common: &Common) -> Result<ExperimentConfig> {
    let base = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    Ok(base.overlay(ExperimentConfig {
        files: common.files,
        databases: common.databases,
        mu: common.mu.clone(),
        file_bits: common.file_bits,
        trials: common.trials,
        seed: common.seed,
        policy: None,
        out: common.out.clone(),
    }))
}

fn need<T>(value: Option<T>, name: &str) -> Result<T> {
    value.ok_or_else(|| Error::InvalidArgument(format!("missing required parameter --{name}")))
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| {
            Error::InvalidArgument(format!("cannot create {}: {e}", p.display()))
        })?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn io_err(e: io::Error) -> Error {
    Error::InvalidArgument(format!("write failed: {e}"))
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidArgument(_) | Error::InvalidLength { .. } => EXIT_USAGE,
                _ => EXIT_VIOLATION,
            }
        }
    }
}

fn execute(command: Command) -> Result<i32> {
    match command {
        Command::Capacity(common) => {
            let cfg = experiment(&common)?;
            let value = capacity_decentralized(
                need(cfg.files, "k")?,
                need(cfg.databases, "n")?,
                &cfg.ratio()?,
            );
            writeln!(output(&cfg.out)?, "{}", format_exact(&value)).map_err(io_err)?;
        }
        Command::Classical(common) => {
            let cfg = experiment(&common)?;
            let replicas = need(cfg.databases, "n")?;
            if replicas == 0 {
                return Err(Error::InvalidArgument("--n must be >= 1".into()));
            }
            let value = capacity_classical(need(cfg.files, "k")?, replicas);
            writeln!(output(&cfg.out)?, "{}", format_exact(&value)).map_err(io_err)?;
        }
        Command::Envelope { common, at } => {
            let cfg = experiment(&common)?;
            let files = need(cfg.files, "k")?;
            let databases = need(cfg.databases, "n")?;
            let mut out = output(&cfg.out)?;
            match at {
                Some(mu) => {
                    let mu: StorageRatio = mu.parse()?;
                    let value = centralized_envelope(files, databases)?.evaluate(mu.value())?;
                    writeln!(out, "{}", format_exact(&value)).map_err(io_err)?;
                }
                None => {
                    writeln!(out, "t,mu,cost,cost_decimal,on_envelope").map_err(io_err)?;
                    for (t, mu, cost, on) in envelope_table(files, databases)? {
                        writeln!(out, "{t},{mu},{cost},{:.6},{on}", to_f64(&cost)).map_err(io_err)?;
                    }
                }
            }
        }
        Command::Simulate {
            common,
            policy,
            cache_files,
        } => {
            let mut cfg = experiment(&common)?;
            match policy.as_deref() {
                None => {}
                Some("uniform-random") => cfg.policy = Some(PolicySpec::UniformRandom),
                Some("whole-file-prefix") => {
                    if cache_files.iter().any(|&f| f == 0) {
                        return Err(Error::InvalidArgument("--cache-files is 1-based".into()));
                    }
                    cfg.policy = Some(PolicySpec::WholeFilePrefix {
                        files: cache_files.iter().map(|f| f - 1).collect(),
                    });
                }
                Some(other) => {
                    return Err(Error::InvalidArgument(format!(
                        "unknown policy {other:?} (explicit sets come from --config)"
                    )))
                }
            }
            let sim = cfg.simulation()?;
            let summary = simulate_trials(&sim)?;
            write_simulation_csv(&summary, &sim, output(&cfg.out)?)?;
        }
        Command::Sweep {
            common,
            vary,
            from,
            to,
            step,
            envelope,
        } => {
            let cfg = experiment(&common)?;
            let files = need(cfg.files, "k")?;
            let sweep = match vary.as_str() {
                "n" | "N" => Sweep::Databases {
                    from: from
                        .parse()
                        .map_err(|_| Error::InvalidArgument(format!("bad --from {from:?}")))?,
                    to: to
                        .parse()
                        .map_err(|_| Error::InvalidArgument(format!("bad --to {to:?}")))?,
                    ratio: cfg.ratio()?,
                },
                "mu" => Sweep::Ratio {
                    from: ratio::parse(&from)?,
                    to: ratio::parse(&to)?,
                    step: ratio::parse(&step)?,
                    databases: need(cfg.databases, "n")?,
                },
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "--vary must be n or mu (got {other:?})"
                    )))
                }
            };
            let simulate = match (cfg.trials, cfg.file_bits) {
                (Some(trials), Some(bits)) => Some((bits, trials, cfg.seed.unwrap_or(0))),
                _ => None,
            };
            let rows = run_sweep(&SweepConfig {
                files,
                sweep,
                envelope,
                simulate,
            })?;
            write_sweep_csv(&rows, output(&cfg.out)?)?;
        }
        Command::Converse(common) => {
            let cfg = experiment(&common)?;
            let files = need(cfg.files, "k")?;
            let databases = need(cfg.databases, "n")?;
            let file_bits = need(cfg.file_bits, "file-bits")?;
            let mu = cfg.ratio()?;
            let policy = cfg
                .policy
                .clone()
                .unwrap_or(PolicySpec::UniformRandom)
                .with_ratio(mu.clone());
            let trials = cfg.trials.unwrap_or(1).max(1);
            let master = cfg.seed.unwrap_or(0);
            let mut out = output(&cfg.out)?;
            writeln!(out, "trial,bound,bound_over_L").map_err(io_err)?;
            let mut sum = 0.0;
            for t in 0..trials {
                let r = sample_placement(&policy, files, file_bits, databases, seed::derive(master, t as u64))?;
                let p = partition_by_storage_set(&r, files, file_bits)?;
                let terms = converse_bound_realization(&p)?;
                let value = to_f64(&terms.bound);
                sum += value;
                writeln!(out, "{t},{},{:.6}", terms.bound, value / file_bits as f64).map_err(io_err)?;
            }
            let expected = expected_converse_bound(
                &MarginalProfile::uniform(files, file_bits, &mu),
                databases,
                &mu,
            )?;
            writeln!(out, "mean,,{:.6}", sum / trials as f64 / file_bits as f64).map_err(io_err)?;
            writeln!(
                out,
                "expected_uniform,{},{:.6}",
                expected.bound,
                to_f64(&expected.bound) / file_bits as f64
            )
            .map_err(io_err)?;
        }
        Command::Optimize {
            common,
            restarts,
            level,
        } => {
            let cfg = experiment(&common)?;
            let mut opt = OptimizerConfig::new(restarts, cfg.seed.unwrap_or(0));
            if let Some(l) = level {
                opt.objective = BoundObjective::Level(l);
            }
            let report = minimize_expected_bound(
                need(cfg.files, "k")?,
                need(cfg.databases, "n")?,
                &cfg.ratio()?,
                need(cfg.file_bits, "file-bits")?,
                &opt,
            )?;
            let mut out = output(&cfg.out)?;
            writeln!(out, "best_value,{:.12}", report.best_value).map_err(io_err)?;
            writeln!(out, "uniform_value,{:.12}", report.uniform_value).map_err(io_err)?;
            writeln!(out, "improvement_over_uniform,{:.3e}", report.improvement_over_uniform())
                .map_err(io_err)?;
            writeln!(out, "uniform_gradient_norm,{:.3e}", report.uniform_gradient_norm).map_err(io_err)?;
            writeln!(out, "best_gradient_norm,{:.3e}", report.best_gradient_norm).map_err(io_err)?;
            writeln!(out, "converged,{}", report.converged).map_err(io_err)?;
        }
        Command::PrivacyTest {
            common,
            length,
            sessions,
            alpha,
            no_permute,
        } => {
            let cfg = experiment(&common)?;
            let report = privacy_test(&PrivacyTestConfig {
                files: need(cfg.files, "k")?,
                replicas: need(cfg.databases, "n")?,
                length,
                sessions,
                seed: cfg.seed.unwrap_or(0),
                permutations: if no_permute {
                    Permutations::Identity
                } else {
                    Permutations::Uniform
                },
                significance: alpha,
            })?;
            let mut out = output(&cfg.out)?;
            writeln!(out, "theta_a,theta_b,database,chi_square,dof,p_value").map_err(io_err)?;
            for c in &report.comparisons {
                writeln!(
                    out,
                    "{},{},{},{:.4},{},{:.6}",
                    c.desired.0 + 1,
                    c.desired.1 + 1,
                    c.replica,
                    c.statistic,
                    c.degrees_of_freedom,
                    c.p_value
                )
                .map_err(io_err)?;
            }
            writeln!(out, "structural_histograms_equal,{}", report.structural_equal).map_err(io_err)?;
            writeln!(out, "result,{}", if report.passed() { "pass" } else { "fail" }).map_err(io_err)?;
            if !report.passed() {
                return Ok(EXIT_VIOLATION);
            }
        }
    }
    Ok(EXIT_OK)
}
