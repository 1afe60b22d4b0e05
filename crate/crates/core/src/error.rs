use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("q must lie strictly inside (0, 1), got {0}")]
    InvalidQ(f64),

    #[error("coordinate index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite evaluation at {point:?}")]
    NumericFailure { point: Vec<f64> },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("matrix has non-finite entries")]
    NonFiniteMatrix,

    #[error("block of size {0} exceeds 2x2")]
    BlockTooLarge(usize),

    #[error("shift floor delta must be positive, got {0}")]
    InvalidDelta(f64),

    #[error("not a descent direction (initial slope {0:e})")]
    NotDescent(f64),

    #[error("sufficient decrease not reached after {0} step reductions")]
    LineSearchFailed(usize),

    #[error("constraint Jacobian is rank deficient")]
    DegenerateConstraints,

    #[error("QP subproblem failed: {0}")]
    QpFailure(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown problem {0:?}")]
    UnknownProblem(String),

    #[error("{path}: {message}")]
    Io { path: String, message: String },

    #[error("malformed input: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn io(path: &std::path::Path, err: impl std::fmt::Display) -> Self {
        Error::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_finite(point: &[f64], values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NumericFailure {
            point: point.to_vec(),
        })
    }
}
