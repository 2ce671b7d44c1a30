//! Jacobian of the moment conditions: `G(theta) = -grad V(theta)`, by
//! central finite differences (the covariance has no tractable analytic
//! derivative in H).

use super::{v_theta, MomentSpec};
use crate::error::Result;
use nalgebra::DMatrix;

/// Per-coordinate step `cbrt(eps) * max(|theta_j|, 1)`.
pub(crate) fn fd_step(theta_j: f64) -> f64 {
    f64::EPSILON.cbrt() * theta_j.abs().max(1.0)
}

/// `G(theta) = -grad V(theta)` as an L x p matrix.
pub fn g_gradient(spec: &MomentSpec, theta: &[f64]) -> Result<DMatrix<f64>> {
    let l = spec.n_moments();
    let p = theta.len();
    let mut g = DMatrix::zeros(l, p);
    for j in 0..p {
        let h = fd_step(theta[j]);
        let mut up = theta.to_vec();
        up[j] += h;
        let mut down = theta.to_vec();
        down[j] -= h;
        let v_up = v_theta(spec, &up)?;
        let v_down = v_theta(spec, &down)?;
        for i in 0..l {
            g[(i, j)] = -(v_up[i] - v_down[i]) / (2.0 * h);
        }
    }
    Ok(g)
}
