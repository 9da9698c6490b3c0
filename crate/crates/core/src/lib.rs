//! Private information retrieval from decentralized uncoded caching
//! databases.
//!
//! A data center holds `K` files of `L` bits. In the caching phase each of
//! `N` databases independently caches at most `mu K L` bits. In the retrieval
//! phase a user downloads one file from the data center and the databases
//! without revealing which file it wants.
//!
//! - [`model`]: files, addresses, cache realizations, storage-set partition
//! - [`placement`]: caching policies and their empirical marginals
//! - [`protocol`]: the replicated-database PIR primitive
//! - [`retrieval`]: end-to-end retrieval, cost accounting, Monte Carlo trials
//! - [`analysis`]: capacity formulas, converse bounds, placement optimizer
//! - [`harness`] and [`cli`]: experiment configuration, CSV and the command line

pub mod analysis;
pub mod cli;
pub mod error;
pub mod harness;
pub mod model;
pub mod placement;
pub mod protocol;
pub mod ratio;
pub mod retrieval;
pub mod seed;

pub use error::{Error, Result};
