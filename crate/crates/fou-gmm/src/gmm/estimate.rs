//! Estimator driver: weighting resolution, multi-start box optimization and
//! the sandwich asymptotic covariance.

use super::gradient::g_gradient;
use super::omega::{omega, OmegaInfo};
use super::optimizer::{minimize_in_box, multistart_points, BoxOptimizerCfg, OptimizerRun};
use super::{quadratic_form, sample_mean_squares, v_theta, MomentSpec, Trajectory};
use crate::error::{FouGmmError, Result};
use nalgebra::DMatrix;

/// Choice of the GMM weighting matrix A.
#[derive(Debug, Clone, PartialEq)]
pub enum Weighting {
    /// A = I. With L = p this is the exactly identified method of moments.
    Identity,
    /// A = Omega(theta_ref)^{-1} at a supplied reference parameter vector
    /// (the oracle used in simulation studies where the truth is known).
    OracleEfficient(Vec<f64>),
    /// Feasible two-step: pass 1 with A = I, then A = Omega(theta_hat_1)^{-1}.
    TwoStep { k_max: usize },
}

#[derive(Debug, Clone, Copy)]
pub struct OptimizerCfg {
    pub box_cfg: BoxOptimizerCfg,
    /// Multi-start count: box center plus n-1 Latin-hypercube points.
    pub n_starts: usize,
    pub start_seed: u64,
    /// A coordinate within this fraction of the box width of a bound flags
    /// the fit as a boundary solution.
    pub boundary_tol_rel: f64,
    pub omega_k_max: usize,
    pub omega_tol: f64,
}

impl Default for OptimizerCfg {
    fn default() -> Self {
        Self {
            box_cfg: BoxOptimizerCfg::default(),
            n_starts: 5,
            start_seed: 0x0f0e_d00d,
            boundary_tol_rel: 1e-6,
            omega_k_max: 20_000,
            omega_tol: 1e-10,
        }
    }
}

/// A fitted GMM estimate.
#[derive(Debug, Clone)]
pub struct GmmFit {
    pub theta_hat: Vec<f64>,
    pub objective: f64,
    pub weighting_used: DMatrix<f64>,
    pub weighting_desc: String,
    /// Covariance of theta_hat: sandwich / n_terms.
    pub asym_cov: DMatrix<f64>,
    pub std_errors: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub grad_norm: f64,
    /// True when some coordinate sits at the box edge (asymptotics invalid).
    pub boundary: bool,
    pub n_terms: usize,
    pub omega_info: OmegaInfo,
    pub n_evals: usize,
}

/// GMM estimate from a trajectory.
pub fn estimate(
    spec: &MomentSpec,
    traj: &Trajectory,
    weighting: &Weighting,
    lo: &[f64],
    hi: &[f64],
    cfg: &OptimizerCfg,
) -> Result<GmmFit> {
    let mean_sq = sample_mean_squares(spec, traj)?;
    let n_terms = spec.n_terms(traj.len());
    estimate_from_mean_squares(spec, &mean_sq, n_terms, weighting, lo, hi, cfg)
}

/// GMM estimate from precomputed per-filter means of squared filtered
/// values. Substituting the population variances V(theta_0) here runs the
/// estimator on noiseless moments (it must recover theta_0 exactly).
pub fn estimate_from_mean_squares(
    spec: &MomentSpec,
    mean_sq: &[f64],
    n_terms: usize,
    weighting: &Weighting,
    lo: &[f64],
    hi: &[f64],
    cfg: &OptimizerCfg,
) -> Result<GmmFit> {
    let (a, desc, omega_info) = match weighting {
        Weighting::Identity => resolve_weighting(spec, &Weighting::Identity, cfg)?,
        Weighting::OracleEfficient(_) => resolve_weighting(spec, weighting, cfg)?,
        Weighting::TwoStep { k_max } => {
            let identity = DMatrix::identity(spec.n_moments(), spec.n_moments());
            let pass1 = best_start(spec, mean_sq, &identity, lo, hi, cfg)?;
            let (om, info) = omega(spec, &pass1.x, *k_max, cfg.omega_tol)?;
            (spd_inverse(&om)?, "two-step".to_string(), Some(info))
        }
    };
    estimate_with_matrix(spec, mean_sq, n_terms, &a, &desc, omega_info, lo, hi, cfg)
}

/// Resolves a data-independent weighting into its matrix. Two-step weighting
/// depends on the sample and cannot be resolved here.
pub fn resolve_weighting(
    spec: &MomentSpec,
    weighting: &Weighting,
    cfg: &OptimizerCfg,
) -> Result<(DMatrix<f64>, String, Option<OmegaInfo>)> {
    let l = spec.n_moments();
    match weighting {
        Weighting::Identity => Ok((DMatrix::identity(l, l), "identity".to_string(), None)),
        Weighting::OracleEfficient(theta_ref) => {
            let (om, info) = omega(spec, theta_ref, cfg.omega_k_max, cfg.omega_tol)?;
            Ok((spd_inverse(&om)?, format!("oracle({theta_ref:?})"), Some(info)))
        }
        Weighting::TwoStep { .. } => Err(FouGmmError::InvalidParams(
            "two-step weighting is sample-dependent; use estimate_from_mean_squares".into(),
        )),
    }
}

/// Estimation with an already-resolved SPD weighting matrix.
#[allow(clippy::too_many_arguments)]
pub fn estimate_with_matrix(
    spec: &MomentSpec,
    mean_sq: &[f64],
    n_terms: usize,
    a: &DMatrix<f64>,
    desc: &str,
    omega_info: Option<OmegaInfo>,
    lo: &[f64],
    hi: &[f64],
    cfg: &OptimizerCfg,
) -> Result<GmmFit> {
    let l = spec.n_moments();
    let p = spec.param_dim();
    if mean_sq.len() != l {
        return Err(FouGmmError::DimensionMismatch(format!(
            "{} sample moments for {l} filters",
            mean_sq.len()
        )));
    }
    if lo.len() != p || hi.len() != p {
        return Err(FouGmmError::DimensionMismatch(format!(
            "box dimension {} vs parameter dimension {p}",
            lo.len()
        )));
    }
    let mut omega_info = omega_info;
    let desc = desc.to_string();

    let best = best_start(spec, mean_sq, a, lo, hi, cfg)?;
    if !best.converged {
        return Err(FouGmmError::NonConvergence {
            max_iters: cfg.box_cfg.max_iters,
            objective: best.f,
        });
    }
    let theta_hat = best.x.clone();

    let boundary = theta_hat
        .iter()
        .zip(lo.iter().zip(hi))
        .any(|(&t, (&l, &h))| {
            let width = h - l;
            t - l <= cfg.boundary_tol_rel * width || h - t <= cfg.boundary_tol_rel * width
        });

    // Sandwich covariance C Omega C' / n with C = (G'AG)^{-1} G'A, evaluated
    // at the estimate (feasible weighting reuses the same Omega).
    let g_mat = g_gradient(spec, &theta_hat)?;
    let (om_hat, info_hat) = omega(spec, &theta_hat, cfg.omega_k_max, cfg.omega_tol)?;
    if omega_info.is_none() {
        omega_info = Some(info_hat);
    }
    let gag = g_mat.transpose() * a * &g_mat;
    let gag_inv = gag.try_inverse().ok_or(FouGmmError::Singular("G'AG in sandwich"))?;
    let c = gag_inv * g_mat.transpose() * a;
    let asym_cov = (&c * om_hat * c.transpose()) / n_terms as f64;
    let std_errors = (0..p).map(|j| asym_cov[(j, j)].max(0.0).sqrt()).collect();

    Ok(GmmFit {
        theta_hat,
        objective: best.f,
        weighting_used: a.clone(),
        weighting_desc: desc,
        asym_cov,
        std_errors,
        iterations: best.iterations,
        converged: best.converged,
        grad_norm: best.grad_norm,
        boundary,
        n_terms,
        omega_info: omega_info.unwrap_or(OmegaInfo { k_used: 0, rel_increment: 0.0 }),
        n_evals: best.n_evals,
    })
}

/// Runs the multi-start sweep and returns the best final point.
fn best_start(
    spec: &MomentSpec,
    mean_sq: &[f64],
    a: &DMatrix<f64>,
    lo: &[f64],
    hi: &[f64],
    cfg: &OptimizerCfg,
) -> Result<OptimizerRun> {
    let mut objective = |theta: &[f64]| -> Result<f64> {
        let v = v_theta(spec, theta)?;
        let g: Vec<f64> = mean_sq.iter().zip(v).map(|(m, vi)| m - vi).collect();
        Ok(quadratic_form(&g, a))
    };
    let starts = multistart_points(lo, hi, cfg.n_starts, cfg.start_seed);
    let mut best: Option<OptimizerRun> = None;
    let mut total_evals = 0usize;
    for start in &starts {
        let run = minimize_in_box(&mut objective, start, lo, hi, &cfg.box_cfg)?;
        total_evals += run.n_evals;
        let better = match &best {
            None => true,
            Some(b) => run.f < b.f,
        };
        if better {
            best = Some(run);
        }
    }
    let mut best = best.expect("at least one start");
    best.n_evals = total_evals;
    Ok(best)
}

/// Inverse of a symmetric positive-definite matrix via Cholesky.
pub(crate) fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    nalgebra::Cholesky::new(m.clone())
        .map(|c| c.inverse())
        .ok_or(FouGmmError::WeightingNotSpd)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covmodel::{EstimationBox, FouModel, FouParams};
    use crate::filters::{build_bank, FilterKind};
    use approx::assert_relative_eq;

    fn fou_spec(truth: FouParams, orders: &[usize], alpha: f64) -> MomentSpec {
        let bank = build_bank(orders, FilterKind::FiniteDifference).unwrap();
        let model = FouModel::new(truth).unwrap();
        MomentSpec::new(bank, Box::new(model), alpha).unwrap()
    }

    #[test]
    fn noiseless_moments_recover_truth() {
        // Feed V(theta_0) as the "observed" mean squares; the objective has
        // a unique zero at theta_0 and the optimizer must find it.
        let truth = FouParams::new(0.62, 1.1, 0.95).unwrap();
        let spec = fou_spec(truth, &[1, 2, 3], 0.1);
        let v0 = v_theta(&spec, &[0.62, 1.1, 0.95]).unwrap();
        let b = EstimationBox::default_joint();
        let model = FouModel::new(truth).unwrap();
        let (lo, hi) = model.free_bounds(&b);
        let fit = estimate_from_mean_squares(
            &spec,
            &v0,
            998,
            &Weighting::Identity,
            &lo,
            &hi,
            &OptimizerCfg::default(),
        )
        .unwrap();
        assert!(fit.converged);
        assert!(fit.objective < 1e-14, "objective {}", fit.objective);
        assert_relative_eq!(fit.theta_hat[0], 0.62, epsilon = 2e-4);
        assert_relative_eq!(fit.theta_hat[1], 1.1, epsilon = 2e-3);
        assert_relative_eq!(fit.theta_hat[2], 0.95, epsilon = 2e-4);
        assert!(!fit.boundary);
        assert_eq!(fit.weighting_desc, "identity");
    }

    #[test]
    fn noiseless_lambda_fixed_recover_truth() {
        let truth = FouParams::new(0.3, 1.0, 1.0).unwrap();
        let bank = build_bank(&[1, 2], FilterKind::FiniteDifference).unwrap();
        let model = FouModel::with_fixed_lambda(truth).unwrap();
        let spec = MomentSpec::new(bank, Box::new(model.clone()), 0.1).unwrap();
        let v0 = v_theta(&spec, &[0.3, 1.0]).unwrap();
        let (lo, hi) = model.free_bounds(&EstimationBox::default_lambda_fixed());
        let fit = estimate_from_mean_squares(
            &spec,
            &v0,
            998,
            &Weighting::Identity,
            &lo,
            &hi,
            &OptimizerCfg::default(),
        )
        .unwrap();
        assert!(fit.converged);
        assert_relative_eq!(fit.theta_hat[0], 0.3, epsilon = 1e-3);
        assert_relative_eq!(fit.theta_hat[1], 1.0, epsilon = 1e-3);
    }

    #[test]
    fn degenerate_trajectory_flags_boundary() {
        // Constant path: filtered squares are all zero, sigma runs to the
        // box floor.
        let truth = FouParams::new(0.6, 1.0, 1.0).unwrap();
        let spec = fou_spec(truth, &[1, 2, 3], 0.1);
        let traj = Trajectory::new(vec![2.5; 200], 0.1).unwrap();
        let b = EstimationBox::default_joint();
        let (lo, hi) = FouModel::new(truth).unwrap().free_bounds(&b);
        let fit = estimate(&spec, &traj, &Weighting::Identity, &lo, &hi, &OptimizerCfg::default());
        match fit {
            Ok(f) => assert!(f.boundary, "expected boundary flag, got {:?}", f.theta_hat),
            // Sigma pinned at the floor may also present as slow convergence.
            Err(FouGmmError::NonConvergence { .. }) => {}
            Err(e) => panic!("unexpected error {e:?}"),
        }
    }

    #[test]
    fn sandwich_simplifies_when_a_is_omega_inverse() {
        // With A = Omega(theta)^{-1}, C Omega C' == (G' Omega^{-1} G)^{-1}.
        let truth = FouParams::new(0.6, 1.0, 1.0).unwrap();
        let spec = fou_spec(truth, &[1, 2, 3, 4], 0.1);
        let theta = [0.6, 1.0, 1.0];
        let (om, _) = omega(&spec, &theta, 20_000, 1e-10).unwrap();
        let a = spd_inverse(&om).unwrap();
        let g = g_gradient(&spec, &theta).unwrap();
        let gag = g.transpose() * &a * &g;
        let gag_inv = gag.clone().try_inverse().unwrap();
        let c = gag_inv.clone() * g.transpose() * &a;
        let sandwich = &c * &om * c.transpose();
        let simplified = gag_inv;
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(sandwich[(i, j)], simplified[(i, j)], max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn weighting_matrix_requires_spd() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]); // indefinite
        assert!(matches!(spd_inverse(&m), Err(FouGmmError::WeightingNotSpd)));
    }
}
