//! Long-run covariance of the scaled moment vector:
//! `Omega_ij = 2 sum_{k in Z} gamma_ij(k)^2` with
//! `gamma_ij(k) = E[phi_i(t_{n+k}) phi_j(t_n)]`.

use super::MomentSpec;
use crate::error::{FouGmmError, Result};
use crate::filters::cross_covariance;
use nalgebra::DMatrix;

/// Truncation record for an Omega evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmegaInfo {
    /// Largest |k| included in the sum.
    pub k_used: usize,
    /// Relative increment of the partial sums at the stopping point.
    pub rel_increment: f64,
}

/// Computes Omega at the given parameter vector. The two-sided sum over k is
/// truncated once the relative increment stays below `tol` (or errs at
/// `k_max`). Symmetric positive semidefinite by construction.
pub fn omega(
    spec: &MomentSpec,
    theta: &[f64],
    k_max: usize,
    tol: f64,
) -> Result<(DMatrix<f64>, OmegaInfo)> {
    let l = spec.n_moments();
    let taps = spec.padded_len();
    let model = spec.model().with_params_vector(theta)?;

    // Lag grid grown in doubling chunks; lag k needs rho up to k + taps - 1.
    let mut grid = model.rho_lag_grid(spec.alpha(), (256 + taps).max(4 * taps))?;
    let filters = spec.bank().filters();

    let gamma = |grid: &[f64], i: usize, j: usize, k: i64| -> f64 {
        cross_covariance(&filters[i], &filters[j], k, |lag| grid[lag])
    };

    // k = 0 term.
    let mut sums = DMatrix::<f64>::zeros(l, l);
    for i in 0..l {
        for j in i..l {
            let g0 = gamma(&grid, i, j, 0);
            sums[(i, j)] += g0 * g0;
        }
    }

    let min_k = 8 * taps;
    let mut stable_run = 0;
    let mut k = 0usize;
    let mut last_rel = f64::INFINITY;
    while k < k_max {
        k += 1;
        if k + taps >= grid.len() {
            grid = model.rho_lag_grid(spec.alpha(), (grid.len() * 2).max(k + taps + 1))?;
        }
        let mut max_rel: f64 = 0.0;
        for i in 0..l {
            for j in i..l {
                let gp = gamma(&grid, i, j, k as i64);
                let gm = gamma(&grid, i, j, -(k as i64));
                let inc = gp * gp + gm * gm;
                sums[(i, j)] += inc;
                max_rel = max_rel.max(inc / sums[(i, j)].max(f64::MIN_POSITIVE));
            }
        }
        last_rel = max_rel;
        if max_rel < tol {
            stable_run += 1;
            if stable_run >= 3 && k >= min_k {
                break;
            }
        } else {
            stable_run = 0;
        }
    }
    if last_rel >= tol {
        return Err(FouGmmError::NonConvergentTail { increment: last_rel, tol, k_max });
    }

    let mut out = DMatrix::zeros(l, l);
    for i in 0..l {
        for j in i..l {
            out[(i, j)] = 2.0 * sums[(i, j)];
            out[(j, i)] = out[(i, j)];
        }
    }
    Ok((out, OmegaInfo { k_used: k, rel_increment: last_rel }))
}

#[cfg(test)]
mod tests {
    use super::super::testutil::{ExpCov, WhiteNoise};
    use super::super::MomentSpec;
    use super::*;
    use crate::filters::{build_bank, FilterKind};
    use approx::assert_relative_eq;

    #[test]
    fn omega_white_noise_single_filter() {
        // Filter (1,-1) on white noise: gamma(0) = 2, gamma(+-1) = -1,
        // Omega_11 = 2 (1 + 4 + 1) = 12.
        let bank = build_bank(&[1], FilterKind::FiniteDifference).unwrap();
        let spec = MomentSpec::new(bank, Box::new(WhiteNoise { var: 1.0 }), 1.0).unwrap();
        let (omega_m, info) = omega(&spec, &[1.0], 10_000, 1e-12).unwrap();
        assert_relative_eq!(omega_m[(0, 0)], 12.0, epsilon = 1e-12);
        assert!(info.k_used >= 16);
    }

    #[test]
    fn omega_matches_brute_force() {
        // Exponential covariance, bank (1,2): brute-force the double sum.
        let bank = build_bank(&[1, 2], FilterKind::FiniteDifference).unwrap();
        let model = ExpCov { var: 1.3, decay: 0.6, alpha: 0.5 };
        let spec = MomentSpec::new(bank, Box::new(model), 0.5).unwrap();
        let (omega_m, _) = omega(&spec, &[1.3, 0.6], 10_000, 1e-13).unwrap();

        let rho = |lag: usize| 1.3 * 0.6_f64.powi(lag as i32);
        let filters = spec.bank().filters();
        for i in 0..2 {
            for j in 0..2 {
                let mut s = 0.0;
                for k in -600i64..=600 {
                    let g = cross_covariance(&filters[i], &filters[j], k, rho);
                    s += g * g;
                }
                assert_relative_eq!(omega_m[(i, j)], 2.0 * s, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn omega_symmetric_and_psd() {
        let bank = build_bank(&[1, 2, 3], FilterKind::FiniteDifference).unwrap();
        let model = ExpCov { var: 1.0, decay: 0.8, alpha: 0.1 };
        let spec = MomentSpec::new(bank, Box::new(model), 0.1).unwrap();
        let (omega_m, _) = omega(&spec, &[1.0, 0.8], 10_000, 1e-11).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(omega_m[(i, j)], omega_m[(j, i)]);
            }
        }
        assert!(nalgebra::Cholesky::new(omega_m).is_some(), "Omega should be PD");
    }

    #[test]
    fn omega_nonconvergent_tail_reported() {
        // A covariance that never decays: increments stay order-1.
        struct Flat;
        impl crate::covmodel::CovarianceModel for Flat {
            fn rho(&self, _t: f64) -> crate::error::Result<f64> {
                Ok(1.0)
            }
            fn param_dim(&self) -> usize {
                1
            }
            fn params_vector(&self) -> Vec<f64> {
                vec![0.0]
            }
            fn with_params_vector(
                &self,
                _v: &[f64],
            ) -> crate::error::Result<Box<dyn crate::covmodel::CovarianceModel>> {
                Ok(Box::new(Flat))
            }
        }
        // Order-0 filter keeps the flat covariance: gamma(k) = 1 for all k.
        let bank = build_bank(&[0], FilterKind::FiniteDifference).unwrap();
        let spec = MomentSpec::new(bank, Box::new(Flat), 1.0).unwrap();
        let err = omega(&spec, &[0.0], 200, 1e-10).unwrap_err();
        assert!(matches!(err, FouGmmError::NonConvergentTail { .. }));
    }
}
