use thiserror::Error;

/// Errors raised by the solvers and their kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error(
        "rank-deficient block in {context}: |R[{column},{column}]| = {value:e} below tolerance {tol:e} \
         (deflation is not supported)"
    )]
    RankDeficient {
        context: &'static str,
        column: usize,
        value: f64,
        tol: f64,
    },

    /// The Krylov space became invariant under the operator: the new block is
    /// numerically zero. The projection data up to this step remain valid.
    #[error("Krylov space is invariant after step {step} (exact breakdown)")]
    InvariantSubspace { step: usize },

    #[error("tridiagonal eigensolver failed to converge for eigenvalue {index} after {sweeps} sweeps")]
    EigenNoConvergence { index: usize, sweeps: usize },

    #[error("singular denominator {value:e} for eigenvalue pair ({i}, {j}); coefficient matrix is not definite")]
    SingularDenominator { i: usize, j: usize, value: f64 },

    #[error("matrix is significantly indefinite: eigenvalue {value:e} below -{tol:e}")]
    Indefinite { value: f64, tol: f64 },

    #[error("asymmetric matrix: entry ({i}, {j}) = {aij:e} but ({j}, {i}) = {aji:e}")]
    Asymmetric {
        i: usize,
        j: usize,
        aij: f64,
        aji: f64,
    },

    #[error("zero or negative pivot {value:e} at position {index} in factorization")]
    SingularPivot { index: usize, value: f64 },

    #[error("operator has no inverse-apply capability (needed by the extended Krylov space)")]
    NoInverse,

    #[error("no convergence after {iterations} iterations: last relative residual {last:e}")]
    NotConverged {
        iterations: usize,
        last: f64,
        /// Checked iterations and their relative residuals.
        history: Vec<(usize, f64)>,
    },

    #[error("second Lanczos pass diverged at step {step}: regenerated coefficient differs by {diff:e}")]
    ReplayMismatch { step: usize, diff: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_err(context: &'static str, expected: impl ToString, found: impl ToString) -> Error {
    Error::DimensionMismatch {
        context,
        expected: expected.to_string(),
        found: found.to_string(),
    }
}
