use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("vector belongs to {got}, expected {expected}")]
    LevelMismatch { expected: String, got: String },

    #[error("multi-index {index:?} out of range for {extent} nodes per direction")]
    IndexOutOfRange { index: Vec<usize>, extent: usize },

    #[error("assembly budget exceeded: {nnz} nonzeros > budget {budget}")]
    BudgetExceeded { nnz: usize, budget: usize },

    #[error("mass matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("missing setup: {0}")]
    MissingSetup(String),

    #[error("{0}")]
    Unsupported(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("no convergence after {iterations} iterations (relative residual {relative_residual:e})")]
    Diverged {
        iterations: usize,
        relative_residual: f64,
        residual_history: Vec<f64>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
