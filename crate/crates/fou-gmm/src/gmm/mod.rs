//! The GMM estimator: moment conditions, objective, weighting, optimizer
//! driver, asymptotic covariance and rate diagnostics.

mod estimate;
mod gradient;
mod omega;
mod optimizer;
mod rate;

pub use estimate::{
    estimate, estimate_from_mean_squares, estimate_with_matrix, resolve_weighting, GmmFit,
    OptimizerCfg, Weighting,
};
pub use gradient::g_gradient;
pub use omega::{omega, OmegaInfo};
pub use optimizer::{minimize_in_box, BoxOptimizerCfg, OptimizerRun};
pub use rate::{rate_diagnostic, RatePoint, RateReport};

/// Public alias of the internal quadratic form, for examples and tests.
pub fn quadratic_form_pub(g: &[f64], a: &nalgebra::DMatrix<f64>) -> f64 {
    quadratic_form(g, a)
}

use crate::covmodel::CovarianceModel;
use crate::error::{FouGmmError, Result};
use crate::filters::{Filter, FilterBank};
use nalgebra::DMatrix;

/// Equally spaced observations `X_0 .. X_N` with step `alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    values: Vec<f64>,
    alpha: f64,
}

impl Trajectory {
    pub fn new(values: Vec<f64>, alpha: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(FouGmmError::Data("empty trajectory".into()));
        }
        if !(alpha > 0.0) {
            return Err(FouGmmError::InvalidParams(format!("alpha = {alpha}, need alpha > 0")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(FouGmmError::Data("trajectory contains non-finite values".into()));
        }
        Ok(Self { values, alpha })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Moment-condition setup: a filter bank, a covariance model family and the
/// sampling step. Immutable; shareable across threads.
pub struct MomentSpec {
    bank: FilterBank,
    model: Box<dyn CovarianceModel>,
    alpha: f64,
}

impl MomentSpec {
    /// Validates the rank condition `rank(B) >= p` against the model's
    /// parameter count.
    pub fn new(bank: FilterBank, model: Box<dyn CovarianceModel>, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(FouGmmError::InvalidParams(format!("alpha = {alpha}, need alpha > 0")));
        }
        let p = model.param_dim();
        if bank.rank() < p {
            return Err(FouGmmError::RankDeficient { rank: bank.rank(), needed: p });
        }
        Ok(Self { bank, model, alpha })
    }

    pub fn bank(&self) -> &FilterBank {
        &self.bank
    }

    pub fn model(&self) -> &dyn CovarianceModel {
        self.model.as_ref()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Number of moment conditions L.
    pub fn n_moments(&self) -> usize {
        self.bank.len()
    }

    pub fn param_dim(&self) -> usize {
        self.model.param_dim()
    }

    /// Common padded tap count of the bank.
    pub fn padded_len(&self) -> usize {
        self.bank.padded_len()
    }

    /// Number of averaged terms for a trajectory of `len` points.
    pub fn n_terms(&self, len: usize) -> usize {
        len + 1 - self.padded_len()
    }

    fn check_traj(&self, traj: &Trajectory) -> Result<()> {
        let needed = self.padded_len() + 1;
        if traj.len() < needed {
            return Err(FouGmmError::TrajectoryTooShort { len: traj.len(), needed });
        }
        if traj.alpha() != self.alpha {
            return Err(FouGmmError::DimensionMismatch(format!(
                "trajectory step {} does not match spec step {}",
                traj.alpha(),
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Filtered series `phi(t_i) = sum_q a_q X_{i-q}` for `i = M-1 .. N`
/// (`M` taps), length `N - M + 2`.
pub fn filtered_series(traj: &Trajectory, filter: &Filter) -> Result<Vec<f64>> {
    let x = traj.values();
    let a = filter.coeffs();
    let m = a.len();
    if x.len() < m {
        return Err(FouGmmError::TrajectoryTooShort { len: x.len(), needed: m });
    }
    let mut out = Vec::with_capacity(x.len() - m + 1);
    for i in m - 1..x.len() {
        let mut acc = 0.0;
        for (q, &aq) in a.iter().enumerate() {
            acc += aq * x[i - q];
        }
        out.push(acc);
    }
    Ok(out)
}

/// Per-filter mean of the squared filtered series. This is the only data
/// statistic the objective needs; everything else is model-implied.
pub fn sample_mean_squares(spec: &MomentSpec, traj: &Trajectory) -> Result<Vec<f64>> {
    spec.check_traj(traj)?;
    spec.bank()
        .filters()
        .iter()
        .map(|f| {
            let phi = filtered_series(traj, f)?;
            Ok(phi.iter().map(|v| v * v).sum::<f64>() / phi.len() as f64)
        })
        .collect()
}

/// Model-implied filtered variances `V_l(theta) = sum_k b_k rho_theta(alpha k)`.
pub fn v_theta(spec: &MomentSpec, theta: &[f64]) -> Result<Vec<f64>> {
    let model = spec.model().with_params_vector(theta)?;
    let grid = model.rho_lag_grid(spec.alpha(), spec.padded_len())?;
    Ok(v_from_grid(spec.bank(), &grid))
}

pub(crate) fn v_from_grid(bank: &FilterBank, grid: &[f64]) -> Vec<f64> {
    (0..bank.len())
        .map(|l| {
            bank.b_vector(l)
                .iter()
                .zip(grid)
                .map(|(&b, &r)| b * r)
                .sum()
        })
        .collect()
}

/// Sample moment vector `g_hat_l = mean(phi_l^2) - V_l(theta)`.
pub fn g_hat(spec: &MomentSpec, traj: &Trajectory, theta: &[f64]) -> Result<Vec<f64>> {
    let mean_sq = sample_mean_squares(spec, traj)?;
    let v = v_theta(spec, theta)?;
    Ok(mean_sq.iter().zip(v).map(|(m, v)| m - v).collect())
}

/// Quadratic form `g' A g`.
pub(crate) fn quadratic_form(g: &[f64], a: &DMatrix<f64>) -> f64 {
    let mut total = 0.0;
    for (i, &gi) in g.iter().enumerate() {
        for (j, &gj) in g.iter().enumerate() {
            total += gi * a[(i, j)] * gj;
        }
    }
    total
}

/// GMM objective `Q_hat(theta) = g_hat' A g_hat` for an SPD matrix `A`.
pub fn objective(spec: &MomentSpec, traj: &Trajectory, theta: &[f64], a: &DMatrix<f64>) -> Result<f64> {
    let l = spec.n_moments();
    if a.nrows() != l || a.ncols() != l {
        return Err(FouGmmError::DimensionMismatch(format!(
            "weighting is {}x{}, need {l}x{l}",
            a.nrows(),
            a.ncols()
        )));
    }
    let g = g_hat(spec, traj, theta)?;
    Ok(quadratic_form(&g, a))
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;

    /// White-noise covariance: rho(0) = var, zero at positive lags. The
    /// parameter vector is just (var,), for gradient plumbing tests.
    pub struct WhiteNoise {
        pub var: f64,
    }

    impl CovarianceModel for WhiteNoise {
        fn rho(&self, t: f64) -> Result<f64> {
            Ok(if t == 0.0 { self.var } else { 0.0 })
        }

        fn param_dim(&self) -> usize {
            1
        }

        fn params_vector(&self) -> Vec<f64> {
            vec![self.var]
        }

        fn with_params_vector(&self, v: &[f64]) -> Result<Box<dyn CovarianceModel>> {
            Ok(Box::new(WhiteNoise { var: v[0] }))
        }
    }

    /// Exponential covariance `var * decay^lag` on the integer lag grid.
    pub struct ExpCov {
        pub var: f64,
        pub decay: f64,
        pub alpha: f64,
    }

    impl CovarianceModel for ExpCov {
        fn rho(&self, t: f64) -> Result<f64> {
            let lag = (t / self.alpha).round();
            Ok(self.var * self.decay.powf(lag))
        }

        fn param_dim(&self) -> usize {
            2
        }

        fn params_vector(&self) -> Vec<f64> {
            vec![self.var, self.decay]
        }

        fn with_params_vector(&self, v: &[f64]) -> Result<Box<dyn CovarianceModel>> {
            Ok(Box::new(ExpCov { var: v[0], decay: v[1], alpha: self.alpha }))
        }
    }
}
