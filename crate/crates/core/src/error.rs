use thiserror::Error;

use crate::krylov::SolveReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid sparse structure: {0}")]
    InvalidStructure(String),

    #[error("matrix is not square ({nrows}x{ncols})")]
    NotSquare { nrows: usize, ncols: usize },

    #[error("matrix is not symmetric (max |S - S^T| = {asymmetry:e}, tolerance {tolerance:e})")]
    NotSymmetric { asymmetry: f64, tolerance: f64 },

    #[error("matrix is not positive definite (pivot {pivot:e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("problem size {size} exceeds the dense cap of {cap}")]
    SizeCap { size: usize, cap: usize },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("iteration diverged: relative residual {:e} after {} iterations", .0.final_relative_residual(), .0.outer_iterations)]
    Diverged(Box<SolveReport>),

    #[error("eigenvalue {0} coincides with -1")]
    EigenvalueAtMinusOne(num_complex::Complex64),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn check_len(what: &str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch(format!(
            "{what}: expected length {expected}, got {actual}"
        )));
    }
    Ok(())
}
