use thiserror::Error;

/// Errors raised by the solvers, discretization and I/O layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is numerically singular at pivot {index}")]
    SingularPivot { index: usize },

    #[error("matrix is not positive definite (pivot {index} = {value:e})")]
    NotPositiveDefinite { index: usize, value: f64 },

    #[error("zero diagonal entry in row {row}")]
    ZeroDiagonal { row: usize },

    #[error("non-finite function value at x = {x}")]
    NonFinite { x: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("CG breakdown at iteration {iteration}: (A_z p, p) vanished")]
    Breakdown { iteration: usize },

    #[error("missing quadrature sample for node j = {0}")]
    MissingSample(i64),

    #[error("degenerate triangle {index} (signed area {area:e})")]
    DegenerateTriangle { index: usize, area: f64 },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("problem too large for the dense path: N = {n} exceeds {limit}")]
    TooLarge { n: usize, limit: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
