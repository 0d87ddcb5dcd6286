use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix must have at least one row")]
    EmptyMatrix,
    #[error("expected {expected} entries for a {dim}x{dim} matrix, got {got}")]
    Shape { dim: usize, expected: usize, got: usize },
    #[error("row {row} has {got} entries, expected {expected}")]
    RaggedRow { row: usize, expected: usize, got: usize },
    #[error("entry ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("entry ({row}, {col}) is negative: {value}")]
    Negative { row: usize, col: usize, value: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is not irreducible")]
    NotIrreducible,
    #[error("power iteration did not converge within {0} iterations")]
    NoConvergence(usize),
    #[error("invalid initial composition: {0}")]
    InvalidComposition(String),
    #[error("uniform draw {0} is outside (0, 1)")]
    UniformOutOfRange(f64),
    #[error("epoch {epoch}: replacement matrix rejected: {source}")]
    InvalidReplacement {
        epoch: u64,
        #[source]
        source: Box<Error>,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("trajectory left the probability simplex by {deviation:e} at t = {time}; refine the step")]
    SimplexExit { time: f64, deviation: f64 },
    #[error("horizon {horizon} exceeds the memory budget of {budget} epochs")]
    MemoryBudget { horizon: u64, budget: u64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
