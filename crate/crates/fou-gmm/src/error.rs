//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FouGmmError {
    #[error("domain error in {context}: {message}")]
    Domain { context: &'static str, message: String },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("quadrature did not converge: {0}")]
    NonConvergentQuadrature(String),

    #[error("long-run covariance tail sum not converged: relative increment {increment:.3e} above {tol:.3e} at k_max={k_max}")]
    NonConvergentTail { increment: f64, tol: f64, k_max: usize },

    #[error("moment-condition matrix B is rank deficient: rank {rank}, need at least {needed}")]
    RankDeficient { rank: usize, needed: usize },

    #[error("covariance matrix not positive definite at pivot {pivot}")]
    NotPositiveDefinite { pivot: usize },

    #[error("optimizer did not converge within {max_iters} iterations (best objective {objective:.6e})")]
    NonConvergence { max_iters: usize, objective: f64 },

    #[error("trajectory too short: {len} observations, need at least {needed}")]
    TrajectoryTooShort { len: usize, needed: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("weighting matrix is not symmetric positive definite")]
    WeightingNotSpd,

    #[error("singular matrix in {0}")]
    Singular(&'static str),

    #[error("scenario cell aborted: {failed} of {total} replications failed to converge")]
    TooManyFailures { failed: usize, total: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, FouGmmError>;
