use thiserror::Error;

pub type Result<T, E = LdError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum LdError {
    #[error("table entries must be strictly positive and finite (got {0})")]
    NonPositiveEntry(f64),

    #[error("table entries sum to {0}, which is too far from 1 to renormalize")]
    SumMismatch(f64),

    #[error("count table must contain at least one observation")]
    EmptyCountTable,

    #[error("selection scale factors must be positive (mu = {mu}, nu = {nu})")]
    NonPositiveScale { mu: f64, nu: f64 },

    #[error("odds ratio must be positive (got {0})")]
    NonPositiveLambda(f64),

    #[error("Dirichlet concentration must be positive and finite (got {0})")]
    InvalidAlpha(f64),

    #[error("quadrature failed to reach tolerance {tolerance:e} (estimated error {estimate:e})")]
    QuadratureFailure { tolerance: f64, estimate: f64 },

    #[error("Monte Carlo calibration needs at least {min} samples (got {got})")]
    InsufficientSamples { got: usize, min: usize },

    #[error("volume estimator budget exceeded: N = {n} > cap {cap}")]
    BudgetExceeded { n: u64, cap: u64 },

    #[error("count table has a zero marginal; D is undefined on its fiber")]
    DegenerateMarginals,

    #[error("bin [{lo}, {hi}) received only {count} tables")]
    EmptyBin { lo: f64, hi: f64, count: usize },

    #[error("invalid estimator: {0}")]
    InvalidEstimator(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid calibration: {0}")]
    InvalidCalibration(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
