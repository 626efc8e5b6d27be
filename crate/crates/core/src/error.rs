use thiserror::Error;

/// Errors raised by the numeric core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GpError {
    #[error("dimension mismatch in {op}: expected {expected}, got {actual}")]
    DimensionMismatch {
        op: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("matrix is not square ({rows}x{cols})")]
    NonSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric: |a_ij - a_ji| = {deviation:e} at ({row}, {col})")]
    NonSymmetric {
        row: usize,
        col: usize,
        deviation: f64,
    },

    #[error("matrix is not positive definite (pivot {pivot} = {value:e} after jitter {jitter:e})")]
    NotPositiveDefinite { pivot: usize, value: f64, jitter: f64 },

    #[error("triangular factor is singular at diagonal entry {0}")]
    Singular(usize),

    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("operator is not symmetric positive definite ({0})")]
    OperatorNotSpd(&'static str),

    #[error("conjugate gradients did not converge: {iterations} iterations, relative residual {residual:e}")]
    CgNotConverged { iterations: usize, residual: f64 },

    #[error("{0}")]
    Unsupported(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error at byte {position}: {message} (token `{token}`)")]
    Parse {
        position: usize,
        token: String,
        message: String,
    },
}

pub type Result<T, E = GpError> = std::result::Result<T, E>;

pub(crate) fn check_dim(op: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(GpError::DimensionMismatch {
            op,
            expected,
            actual,
        })
    }
}
