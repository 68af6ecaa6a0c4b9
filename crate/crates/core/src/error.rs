use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("utility has no positive weight")]
    AllZeroWeights,
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("invalid utility spec: {0}")]
    InvalidSpec(String),
    #[error("demand is unbounded: good {good} is desired at price 0")]
    UnboundedDemand { good: usize },
    #[error("unsupported utility class for this operation: {0}")]
    UnsupportedClass(String),
    #[error("instance has no reduction provenance")]
    MissingProvenance,
    #[error("grid of {points} points exceeds cap {cap}")]
    GridTooLarge { points: u128, cap: u128 },
    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
