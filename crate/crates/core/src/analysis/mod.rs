//! Closed-form capacity, converse-bound evaluation and placement optimization.
//!
//! Every closed-form evaluator works in exact rational arithmetic; floating
//! point is confined to the optimizer.

mod capacity;
mod converse;
mod envelope;
mod optimize;

pub use capacity::{
    binomial_mass_total, capacity_classical, capacity_decentralized, harmonic_tail,
};
pub use converse::{
    converse_bound_realization, expected_converse_bound, expected_level_weights,
    three_file_two_database_bound, ConverseTerms, MarginalProfile,
};
pub use envelope::{centralized_envelope, CentralizedEnvelope};
pub use optimize::{
    minimize_expected_bound, project_capped_simplex, BoundObjective, OptimizerConfig,
    OptimizationReport, RestartOutcome,
};
