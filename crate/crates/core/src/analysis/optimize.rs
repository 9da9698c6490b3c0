//! Projected gradient descent for the expected converse bound over the
//! feasible marginals `{p in [0,1]^{KL} : sum p <= mu K L}`.
//!
//! The objective is separable: `L + sum_bits g(p)` with
//! `g(p) = sum_l a_l p^(l-1) (1-p)^(N+1-l)`. The aggregate objective uses
//! the bound's weights; the per-level objectives isolate a single `E[x_l]`.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ratio::{binomial_q, int, to_f64, StorageRatio};
use crate::seed;

use super::{expected_level_weights, MarginalProfile};

/// Which function of the marginals is minimized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundObjective {
    /// The full expected bound `L + sum_l C(N+1,l) h_l E[x_l]`.
    Aggregate,
    /// `E[x_l]` alone, for level `l` in `1..=N+1`.
    Level(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub seed: u64,
    pub max_iterations: usize,
    /// Stop once the projected-gradient norm drops below this.
    pub tolerance: f64,
    pub objective: BoundObjective,
}

impl OptimizerConfig {
    pub fn new(restarts: usize, seed: u64) -> Self {
        OptimizerConfig {
            restarts,
            seed,
            max_iterations: 100_000,
            tolerance: 1e-10,
            objective: BoundObjective::Aggregate,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestartOutcome {
    pub value: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationReport {
    pub files: usize,
    pub file_bits: usize,
    pub best_point: Vec<f64>,
    pub best_value: f64,
    pub best_gradient_norm: f64,
    pub uniform_value: f64,
    pub uniform_gradient_norm: f64,
    /// True iff every restart met the tolerance within the iteration cap.
    pub converged: bool,
    pub restarts: Vec<RestartOutcome>,
}

impl OptimizationReport {
    pub fn best_profile(&self) -> Result<MarginalProfile> {
        MarginalProfile::from_f64(self.files, self.file_bits, &self.best_point)
    }

    /// How far the best value sits below the uniform value (positive means
    /// uniform was beaten).
    pub fn improvement_over_uniform(&self) -> f64 {
        self.uniform_value - self.best_value
    }
}

/// Separable polynomial `offset + sum_i sum_l c_l p_i^(l-1) (1-p_i)^(N+1-l)`.
struct Objective {
    offset: f64,
    coefficients: Vec<f64>,
    databases: usize,
}

impl Objective {
    fn new(files: usize, databases: usize, file_bits: usize, kind: BoundObjective) -> Result<Self> {
        match kind {
            BoundObjective::Aggregate => Ok(Objective {
                offset: file_bits as f64,
                coefficients: expected_level_weights(files, databases).iter().map(to_f64).collect(),
                databases,
            }),
            BoundObjective::Level(l) if (1..=databases + 1).contains(&l) => {
                let c = binomial_q(databases, l - 1)
                    / (int(files as i64) * binomial_q(databases + 1, l));
                let mut coefficients = vec![0.0; databases + 1];
                coefficients[l - 1] = to_f64(&c);
                Ok(Objective {
                    offset: 0.0,
                    coefficients,
                    databases,
                })
            }
            BoundObjective::Level(l) => Err(Error::InvalidArgument(format!(
                "level {l} outside 1..={}",
                databases + 1
            ))),
        }
    }

    fn entry(&self, p: f64) -> (f64, f64) {
        let q = 1.0 - p;
        let top = self.databases + 1;
        let mut value = 0.0;
        let mut slope = 0.0;
        for (i, &c) in self.coefficients.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let a = i as i32; // exponent of p
            let b = (top - 1 - i) as i32; // exponent of 1-p
            value += c * p.powi(a) * q.powi(b);
            let mut d = 0.0;
            if a > 0 {
                d += a as f64 * p.powi(a - 1) * q.powi(b);
            }
            if b > 0 {
                d -= b as f64 * p.powi(a) * q.powi(b - 1);
            }
            slope += c * d;
        }
        (value, slope)
    }

    fn value(&self, p: &[f64]) -> f64 {
        self.offset + p.iter().map(|&v| self.entry(v).0).sum::<f64>()
    }

    fn gradient(&self, p: &[f64]) -> Vec<f64> {
        p.iter().map(|&v| self.entry(v).1).collect()
    }
}

/// Euclidean projection onto `{p in [0,1]^n : sum p <= budget}`.
///
/// Clips to the box; if the budget is exceeded, shifts every coordinate down
/// by the `tau` that makes the clipped sum equal the budget (found by
/// bisection).
pub fn project_capped_simplex(point: &[f64], budget: f64) -> Vec<f64> {
    let clip = |tau: f64| -> Vec<f64> { point.iter().map(|&v| (v - tau).clamp(0.0, 1.0)).collect() };
    let clipped = clip(0.0);
    if clipped.iter().sum::<f64>() <= budget {
        return clipped;
    }
    let mut lo = 0.0;
    let mut hi = point.iter().cloned().fold(0.0, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if clip(mid).iter().sum::<f64>() > budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    clip(hi)
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `|| p - P(p - grad f(p)) ||`, zero exactly at KKT points.
fn projected_gradient_norm(objective: &Objective, p: &[f64], budget: f64) -> f64 {
    let g = objective.gradient(p);
    let step: Vec<f64> = p.iter().zip(&g).map(|(x, d)| x - d).collect();
    distance(p, &project_capped_simplex(&step, budget))
}

fn descend(
    objective: &Objective,
    start: Vec<f64>,
    budget: f64,
    config: &OptimizerConfig,
) -> (Vec<f64>, RestartOutcome) {
    let mut p = project_capped_simplex(&start, budget);
    let mut value = objective.value(&p);
    let mut iterations = 0;
    let mut norm = projected_gradient_norm(objective, &p, budget);
    while iterations < config.max_iterations && norm >= config.tolerance {
        iterations += 1;
        let g = objective.gradient(&p);
        let mut step = 1.0;
        let mut moved = false;
        while step > 1e-20 {
            let trial: Vec<f64> = p.iter().zip(&g).map(|(x, d)| x - step * d).collect();
            let candidate = project_capped_simplex(&trial, budget);
            let candidate_value = objective.value(&candidate);
            let gap = distance(&candidate, &p);
            if candidate_value <= value - gap * gap / (2.0 * step) {
                moved = gap > 0.0;
                p = candidate;
                value = candidate_value;
                break;
            }
            step *= 0.5;
        }
        norm = projected_gradient_norm(objective, &p, budget);
        if !moved {
            break;
        }
    }
    let outcome = RestartOutcome {
        value,
        iterations,
        gradient_norm: norm,
        converged: norm < config.tolerance,
    };
    (p, outcome)
}

/// Multi-restart projected gradient descent from random feasible starts.
pub fn minimize_expected_bound(
    files: usize,
    databases: usize,
    ratio: &StorageRatio,
    file_bits: usize,
    config: &OptimizerConfig,
) -> Result<OptimizationReport> {
    let dimension = files * file_bits;
    if dimension == 0 || dimension > 10_000 {
        return Err(Error::InvalidArgument(format!(
            "optimizer supports 1..=10000 variables (got {dimension})"
        )));
    }
    if config.restarts == 0 {
        return Err(Error::InvalidArgument("restarts must be >= 1".into()));
    }
    let objective = Objective::new(files, databases, file_bits, config.objective)?;
    let mu = ratio.to_f64();
    let budget = mu * dimension as f64;

    let uniform = vec![mu; dimension];
    let uniform_value = objective.value(&uniform);
    let uniform_gradient_norm = projected_gradient_norm(&objective, &uniform, budget);

    let runs: Vec<(Vec<f64>, RestartOutcome)> = (0..config.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = seed::rng(seed::derive(config.seed, r as u64));
            let start: Vec<f64> = (0..dimension).map(|_| rng.random::<f64>()).collect();
            descend(&objective, start, budget, config)
        })
        .collect();

    let (best_index, _) = runs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.value.total_cmp(&b.1 .1.value))
        .expect("at least one restart");
    let best_point = runs[best_index].0.clone();
    let best = runs[best_index].1.clone();
    Ok(OptimizationReport {
        files,
        file_bits,
        best_point,
        best_value: best.value,
        best_gradient_norm: best.gradient_norm,
        uniform_value,
        uniform_gradient_norm,
        converged: runs.iter().all(|r| r.1.converged),
        restarts: runs.into_iter().map(|r| r.1).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::capacity_decentralized;

    #[test]
    fn projection_respects_box_and_budget() {
        let p = project_capped_simplex(&[1.5, -0.2, 0.4], 10.0);
        assert_eq!(p, vec![1.0, 0.0, 0.4]);
        let p = project_capped_simplex(&[0.9, 0.9, 0.3], 1.2);
        assert!((p.iter().sum::<f64>() - 1.2).abs() < 1e-12);
        assert!((p[0] - 0.6).abs() < 1e-12 && p[2].abs() < 1e-12);
    }

    #[test]
    fn projection_of_uniform_shift_returns_uniform() {
        let p = project_capped_simplex(&[0.7; 30], 10.0);
        for v in p {
            assert!((v - 1.0 / 3.0).abs() < 1e-14);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let obj = Objective::new(3, 2, 4, BoundObjective::Aggregate).unwrap();
        for &p in &[0.1, 0.37, 0.8] {
            let h = 1e-6;
            let fd = (obj.entry(p + h).0 - obj.entry(p - h).0) / (2.0 * h);
            assert!((fd - obj.entry(p).1).abs() < 1e-8);
        }
    }

    #[test]
    fn full_storage_feasible_set_is_a_point() {
        let one = StorageRatio::one();
        let report = minimize_expected_bound(2, 2, &one, 3, &OptimizerConfig::new(3, 1)).unwrap();
        let want = 3.0 * to_f64(&capacity_decentralized(2, 2, &one));
        assert!((report.best_value - want).abs() < 1e-9);
        assert!(report.best_point.iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn rejects_bad_configs() {
        let mu = StorageRatio::from_fraction(1, 2).unwrap();
        assert!(minimize_expected_bound(2, 2, &mu, 0, &OptimizerConfig::new(1, 0)).is_err());
        assert!(minimize_expected_bound(2, 2, &mu, 3, &OptimizerConfig::new(0, 0)).is_err());
        let mut cfg = OptimizerConfig::new(1, 0);
        cfg.objective = BoundObjective::Level(4);
        assert!(minimize_expected_bound(2, 2, &mu, 3, &cfg).is_err());
    }

    #[test]
    fn top_level_alone_is_not_minimized_by_uniform() {
        // E[x_{N+1}] is minimized by caching nothing, below the uniform value.
        let mu = StorageRatio::from_fraction(1, 2).unwrap();
        let mut cfg = OptimizerConfig::new(4, 3);
        cfg.objective = BoundObjective::Level(3);
        let report = minimize_expected_bound(2, 2, &mu, 4, &cfg).unwrap();
        assert!(report.best_value < report.uniform_value - 1e-3);
        assert!(report.best_value.abs() < 1e-6);
    }
}
