use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("capacity exceeded: {what} needs {needed}, limit {limit}")]
    Capacity { what: &'static str, needed: u128, limit: u128 },
    #[error("configuration not found in basis")]
    NotFound,
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("degenerate state: {0}")]
    Degenerate(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("singular point: {0}")]
    Singular(String),
    #[error("no orbit: {0}")]
    NoOrbit(String),
}

pub type Result<T> = std::result::Result<T, Error>;
