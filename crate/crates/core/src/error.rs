use thiserror::Error;

/// Errors raised across rule construction, feature maps, GP fitting and data handling.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid node count L = {0} (must be >= 1)")]
    InvalidL(usize),
    #[error("non-positive recurrence coefficient A_{k} = {value:e}")]
    NonPositiveMoment { k: usize, value: f64 },
    #[error("tridiagonal eigensolver did not converge at index {0}")]
    EigenFailure(usize),
    #[error("abscissa {value} at index {index} lies outside (-1, 1)")]
    AbscissaOutOfRange { index: usize, value: f64 },
    #[error("rule nodes are not symmetric about zero (mismatch {0:e})")]
    AsymmetricRule(f64),
    #[error("rule has a node at zero; use odd-aware halving")]
    OddRule,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("1-d node at index {0} is numerically zero")]
    NodeAtZero(usize),
    #[error("invalid interval [{0}, {1}]")]
    InvalidInterval(f64, f64),
    #[error("unsupported kernel family for this operation: {0}")]
    UnsupportedFamily(String),
    #[error("random Fourier features require a seed")]
    SeedRequired,
    #[error("Cholesky factorization failed (jitter reached {jitter:e})")]
    CholeskyFailure { jitter: f64 },
    #[error("problem size {n} exceeds the configured cap {cap}")]
    CapExceeded { n: usize, cap: usize },
    #[error("non-finite loss at iteration {0}")]
    NonFiniteLoss(usize),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("adaptive integration exceeded {0} subdivisions")]
    MaxSubdivision(usize),
    #[error("integrand returned a non-finite value at {0}")]
    NonFinite(f64),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("dataset is empty")]
    EmptyData,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonPositiveMoment { .. }
                | Error::EigenFailure(_)
                | Error::AbscissaOutOfRange { .. }
                | Error::CholeskyFailure { .. }
                | Error::NonFiniteLoss(_)
                | Error::MaxSubdivision(_)
                | Error::NonFinite(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
