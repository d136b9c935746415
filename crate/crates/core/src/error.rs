use thiserror::Error;

/// Errors raised by the spectral, risk and simulation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("matrix is not symmetric: max |K - K^T| = {max_asymmetry:e}")]
    NotSymmetric { max_asymmetry: f64 },

    #[error("matrix is not positive semidefinite: eigenvalue {eigenvalue:e}")]
    NotPsd { eigenvalue: f64 },

    #[error("regularizer is singular (lambda = {lambda}, mu = {mu}); the Kronecker path needs both > 0")]
    SingularRegularizer { lambda: f64, mu: f64 },

    #[error("dense operator of size {rows} exceeds the configured cap of {cap} rows")]
    TooLarge { rows: usize, cap: usize },

    #[error("integral diverges: exponent a = {exponent} must lie in (0, 2)")]
    DivergentIntegral { exponent: f64 },

    #[error("quadrature failed to reach tolerance: estimate {estimate}, error {error:e}")]
    QuadratureFailed { estimate: f64, error: f64 },

    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("epsilon cap does not exist: sqrt(A) (np/sigma^2)^(1/4delta - 1/2) = {factor} >= 1")]
    NoCap { factor: f64 },

    #[error("non-finite risk value at lambda = {lambda}")]
    NonFinite { lambda: f64 },

    #[error("degenerate ratio distribution: standard deviation is zero")]
    DegenerateDistribution,

    #[error("replicate {index} failed: {source}")]
    Replicate {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("inconsistent reports: {0}")]
    InconsistentReports(String),

    #[error("failed to write artifact: {0}")]
    Output(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dims(expected: impl ToString, actual: impl ToString) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}
