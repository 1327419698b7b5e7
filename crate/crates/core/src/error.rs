use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("column {0} has zero norm")]
    ZeroColumn(usize),

    #[error("AR(1) coefficient must satisfy |rho| < 1, got {0}")]
    InvalidRho(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("solver did not converge after {sweeps} sweeps (kkt residual {residual:.3e})")]
    NoConvergence { sweeps: usize, residual: f64 },

    #[error("infeasible supports: s1 + s2 - s = {needed} exceeds p = {p}")]
    InfeasibleSupports { needed: usize, p: usize },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("too many failed replications in setting {setting}: {failed} of {reps}")]
    TooManyFailures {
        setting: String,
        failed: usize,
        reps: usize,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
