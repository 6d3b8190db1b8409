use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite entries in {0}")]
    NonFinite(&'static str),

    #[error("{0} is not positive definite")]
    NotPositiveDefinite(&'static str),

    #[error("{0} is not positive semidefinite")]
    NotPositiveSemidefinite(&'static str),

    #[error("Q is singular; beta is undefined")]
    SingularQ,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("invalid index range {j}..{i}")]
    InvalidRange { j: usize, i: usize },

    #[error("gain is not stabilizing (spectral radius {spectral_radius})")]
    Unstable { spectral_radius: f64 },

    #[error("trajectory diverged at step {step} (epoch {epoch})")]
    Diverged { step: u64, epoch: u32 },

    #[error("regressor is rank deficient (min singular value {min_singular:e})")]
    RankDeficient { min_singular: f64 },

    #[error("modeling error {eps_m} is not below 1/(8|P*|^2) = {limit}")]
    ModelErrorTooLarge { eps_m: f64, limit: f64 },

    #[error("rate product gamma1*gamma2 = {product} is not below 1")]
    RateProductNotContractive { product: f64 },

    #[error("decay rate {0} is outside (0, 1)")]
    InvalidRate(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
