//! Error type shared by every module of the crate.

use std::path::PathBuf;

use thiserror::Error;

/// Failures raised by assembly, factorizations, solvers and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violates a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Operand shapes do not agree.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A query point lies in no cell of the mesh.
    #[error("point ({x}, {y}) lies outside the mesh")]
    PointOutsideMesh { x: f64, y: f64 },

    /// LU elimination met a pivot below the singularity threshold.
    #[error("singular matrix: pivot {pivot:e} in column {column}")]
    SingularMatrix { column: usize, pivot: f64 },

    /// Cholesky factorization met a nonpositive pivot.
    #[error("matrix is not symmetric positive definite: pivot {pivot:e} in row {row}")]
    NotSpd { row: usize, pivot: f64 },

    /// A symmetric routine received a matrix that is not symmetric.
    #[error("matrix is not symmetric: relative asymmetry {0:e}")]
    NotSymmetric(f64),

    /// The QR iteration stalled on an unreduced block.
    #[error("eigenvalue iteration did not converge on block {lo}..={hi}")]
    NoConvergence { lo: usize, hi: usize },

    /// CG met a direction of nonpositive curvature.
    #[error("operator is not positive definite: curvature {0:e}")]
    IndefiniteOperator(f64),

    /// Arnoldi produced a vanishing basis vector before convergence.
    #[error("Arnoldi breakdown at iteration {0}")]
    Breakdown(usize),

    /// An outer solve exhausted its iteration budget.
    #[error("no convergence after {iterations} iterations (relative residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    /// A problem or experiment configuration is inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// A dense computation was requested above its size guard.
    #[error("size {size} exceeds the dense limit {limit}")]
    SizeLimit { size: usize, limit: usize },

    /// Malformed input file.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// I/O failure with the offending path.
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
