use thiserror::Error;

/// Errors raised across the caching, retrieval and analysis layers.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid subfile length {length}: must be a multiple of {block} for {replicas} replicas")]
    InvalidLength {
        length: usize,
        block: usize,
        replicas: usize,
    },

    #[error("budget violation: database(s) {databases:?} exceed the budget of {budget} bits")]
    BudgetViolation { databases: Vec<usize>, budget: usize },

    #[error("protocol violation: {0}")]
    ProtocolViolation(String),

    #[error("reliability failure: {0}")]
    ReliabilityFailure(String),

    #[error("invariant violation: {0}")]
    InvariantViolation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
