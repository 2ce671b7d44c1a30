//! Stationary covariance models and the parameter types for the fOU process.
//!
//! The GMM layer only sees the [`CovarianceModel`] trait: an autocovariance
//! `rho(t)` for `t >= 0` together with a flat free-parameter vector. The fOU
//! implementation lives in [`fou`] and dispatches between a closed form, a
//! spectral integral and a power-law tail depending on `H` and `lambda * t`.

mod fou;

pub use fou::{
    fou_rho_closed, fou_rho_spectral, fou_rho_tail, fou_var0, tail_coefficient,
    tail_coefficient_single_lambda, FouModel, TAIL_SWITCH,
};

use crate::error::{FouGmmError, Result};
use crate::specfun;
use serde::{Deserialize, Serialize};

/// Parameter triple of the fOU process: Hurst exponent, mean-reversion rate,
/// diffusion scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FouParams {
    pub h: f64,
    pub lambda: f64,
    pub sigma: f64,
}

impl FouParams {
    pub fn new(h: f64, lambda: f64, sigma: f64) -> Result<Self> {
        let p = Self { h, lambda, sigma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h < 1.0) {
            return Err(FouGmmError::InvalidParams(format!("H = {} not in (0, 1)", self.h)));
        }
        if !(self.lambda > 0.0) {
            return Err(FouGmmError::InvalidParams(format!("lambda = {} not > 0", self.lambda)));
        }
        if !(self.sigma > 0.0) {
            return Err(FouGmmError::InvalidParams(format!("sigma = {} not > 0", self.sigma)));
        }
        Ok(())
    }
}

/// Componentwise rectangle of admissible parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimationBox {
    pub lo: FouParams,
    pub hi: FouParams,
}

impl EstimationBox {
    pub fn new(lo: FouParams, hi: FouParams) -> Result<Self> {
        lo.validate()?;
        hi.validate()?;
        if !(lo.h < hi.h && lo.lambda < hi.lambda && lo.sigma < hi.sigma) {
            return Err(FouGmmError::InvalidParams(
                "estimation box must satisfy lo < hi componentwise".into(),
            ));
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, p: &FouParams) -> bool {
        p.h >= self.lo.h
            && p.h <= self.hi.h
            && p.lambda >= self.lo.lambda
            && p.lambda <= self.hi.lambda
            && p.sigma >= self.lo.sigma
            && p.sigma <= self.hi.sigma
    }

    /// Default box for joint (H, lambda, sigma) estimation: H restricted to
    /// [1/2, 1) where the closed-form covariance applies, lambda kept under
    /// the identifiability bound exp(Psi(3)).
    pub fn default_joint() -> Self {
        Self {
            lo: FouParams { h: 0.5, lambda: 0.01, sigma: 0.2 },
            hi: FouParams { h: 0.9999, lambda: 2.5, sigma: 3.0 },
        }
    }

    /// Default box for (H, sigma) estimation with lambda pinned; H may range
    /// below 1/2 (the spectral evaluator covers it).
    pub fn default_lambda_fixed() -> Self {
        Self {
            lo: FouParams { h: 0.01, lambda: 0.01, sigma: 0.2 },
            hi: FouParams { h: 0.9999, lambda: 2.5, sigma: 3.0 },
        }
    }
}

/// A stationary autocovariance family with a flat parameter vector.
///
/// `rho` is only ever queried at `t >= 0` (the covariance is symmetric).
/// Implementations must be pure given their parameters so values can be
/// evaluated from any number of threads.
pub trait CovarianceModel: Send + Sync {
    /// Autocovariance at lag `t >= 0` for the model's current parameters.
    fn rho(&self, t: f64) -> Result<f64>;

    /// Number of free parameters.
    fn param_dim(&self) -> usize;

    /// Current free parameters as a vector.
    fn params_vector(&self) -> Vec<f64>;

    /// A new model of the same family with the given free-parameter vector.
    fn with_params_vector(&self, v: &[f64]) -> Result<Box<dyn CovarianceModel>>;

    /// `rho` on the lag grid `t = alpha * k`, `k = 0..count`.
    ///
    /// The default just calls `rho` per lag; implementations override when a
    /// whole grid can be computed incrementally.
    fn rho_lag_grid(&self, alpha: f64, count: usize) -> Result<Vec<f64>> {
        (0..count).map(|k| self.rho(alpha * k as f64)).collect()
    }
}

/// Sufficient identifiability conditions that can fail for a configured
/// setup. These are warnings: the conditions are sufficient, not necessary.
#[derive(Debug, Clone, PartialEq)]
pub enum IdentifiabilityWarning {
    /// The injectivity argument needs a sampling step below 1.
    StepNotBelowOne { alpha: f64 },
    /// The box allows lambda at or above exp(Psi(3)) ~ 2.52.
    LambdaBoundTooLarge { hi: f64, bound: f64 },
    /// The box does not pin the sign of sigma.
    SigmaSignNotFixed { lo: f64 },
}

impl std::fmt::Display for IdentifiabilityWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::StepNotBelowOne { alpha } => {
                write!(f, "sampling step alpha = {alpha} is not < 1; identifiability not guaranteed")
            }
            Self::LambdaBoundTooLarge { hi, bound } => {
                write!(f, "lambda bound {hi} exceeds exp(Psi(3)) ~ {bound:.4}; identifiability not guaranteed")
            }
            Self::SigmaSignNotFixed { lo } => {
                write!(f, "box lower sigma bound {lo} <= 0 does not fix the sign of sigma")
            }
        }
    }
}

/// Checks the sufficient identifiability conditions for a box and step size.
pub fn check_identifiability(box_: &EstimationBox, alpha: f64) -> Vec<IdentifiabilityWarning> {
    let mut warnings = Vec::new();
    if alpha >= 1.0 {
        warnings.push(IdentifiabilityWarning::StepNotBelowOne { alpha });
    }
    // digamma(3) is well inside the domain; unwrap is fine.
    let bound = specfun::digamma(3.0).expect("digamma(3)").exp();
    if box_.hi.lambda >= bound {
        warnings.push(IdentifiabilityWarning::LambdaBoundTooLarge { hi: box_.hi.lambda, bound });
    }
    if box_.lo.sigma <= 0.0 {
        warnings.push(IdentifiabilityWarning::SigmaSignNotFixed { lo: box_.lo.sigma });
    }
    warnings
}
