//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix must be non-empty")]
    EmptyMatrix,
    #[error("matrix entries must be finite")]
    NonFinite,
    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },
    #[error("{what} must be symmetric")]
    NotSymmetric { what: &'static str },
    #[error("matrix is not row-stochastic: row {row} sums to {sum}")]
    NotStochastic { row: usize, sum: f64 },
    #[error("invalid probability vector: {reason}")]
    InvalidProbability { reason: String },
    #[error("invalid argument: {context}")]
    InvalidArgument { context: String },
    #[error("no convergence within {cap} iterations ({context})")]
    NonConvergence { cap: usize, context: &'static str },
    #[error("stationary distribution is not unique (null-space dimension {dim})")]
    NonUniqueStationary { dim: usize },
    #[error("degenerate weight normalizer: predicted mass on applicable inputs is zero")]
    DegenerateNormalizer,
    #[error("covariance matrix is not positive semi-definite")]
    IndefiniteCovariance,
    #[error("process noise covariance is zero; the filter needs a stochastic model")]
    DegenerateNoise,
    #[error("actuation clock violation: step {step} precedes buffered timestamp {timestamp}")]
    ClockViolation { step: u64, timestamp: u64 },
    #[error("buffer age {age} out of range 0..={max}")]
    AgeOutOfRange { age: usize, max: usize },
    #[error("the augmented gain requires a zero default input")]
    NonzeroDefaultInput,
    #[error("stability check dimension {dim} exceeds the configured cap {cap}")]
    DimensionCap { dim: usize, cap: usize },
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
