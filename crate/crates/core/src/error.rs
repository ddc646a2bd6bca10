use crate::conic::SolveStatus;

/// Errors surfaced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("barycentre mismatch: |[mu] - [nu]| = {gap:.3e} exceeds tolerance {tol:.3e}")]
    BarycentreMismatch { gap: f64, tol: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("solver did not reach an optimal point: status {0:?}")]
    NotOptimal(SolveStatus),

    #[error("internal solver error: {0}")]
    Internal(String),

    #[error("problem too large: {0}")]
    TooLarge(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
