use thiserror::Error;

/// Errors raised while building, fitting or querying a kriging model.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("power iteration did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("dominant eigenvector has a negative entry ({value:e})")]
    NegativeEntry { value: f64 },

    #[error("at least {needed} observations are required, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("GLS weight normalizer is not positive")]
    ZeroWeight,

    #[error("scale denominator r(x)'c = {0:e} is below the guard")]
    DegenerateScale(f64),

    #[error("limit kriging denominator r(x)'R^-1 1 = {0:e} is below the guard")]
    DegenerateDenominator(f64),

    #[error("regression basis is rank deficient on the design")]
    RankDeficientBasis,

    #[error("every optimizer start failed")]
    OptimizerFailure,

    #[error("parameter grid is empty")]
    EmptyGrid,

    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
