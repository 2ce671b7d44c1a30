//! Box-constrained quasi-Newton minimizer: dense BFGS with gradient
//! projection onto the box and Armijo backtracking. Dimension here is the
//! parameter count (2 or 3), so the dense inverse-Hessian update is cheap.

use super::gradient::fd_step;
use crate::error::{FouGmmError, Result};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy)]
pub struct BoxOptimizerCfg {
    pub max_iters: usize,
    /// Convergence threshold on the sup-norm of the projected gradient,
    /// scaled by `1 + |f|`.
    pub grad_tol: f64,
    /// Convergence threshold on the relative objective decrease.
    pub f_tol: f64,
    /// Number of consecutive sub-`f_tol` decreases required to stop.
    pub flat_runs: usize,
}

impl Default for BoxOptimizerCfg {
    fn default() -> Self {
        Self { max_iters: 300, grad_tol: 1e-9, f_tol: 5e-13, flat_runs: 2 }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizerRun {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
    pub grad_norm: f64,
    pub n_evals: usize,
}

fn clamp(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((xi, &l), &h) in x.iter_mut().zip(lo).zip(hi) {
        *xi = xi.clamp(l, h);
    }
}

/// Gradient by finite differences, one-sided at the box faces.
fn num_grad<F: FnMut(&[f64]) -> Result<f64>>(
    f: &mut F,
    x: &[f64],
    fx: f64,
    lo: &[f64],
    hi: &[f64],
    evals: &mut usize,
) -> Result<DVector<f64>> {
    let p = x.len();
    let mut g = DVector::zeros(p);
    let mut probe = x.to_vec();
    for j in 0..p {
        let h = fd_step(x[j]);
        let can_up = x[j] + h <= hi[j];
        let can_down = x[j] - h >= lo[j];
        let d = match (can_up, can_down) {
            (true, true) => {
                probe[j] = x[j] + h;
                let fu = f(&probe)?;
                probe[j] = x[j] - h;
                let fd = f(&probe)?;
                *evals += 2;
                (fu - fd) / (2.0 * h)
            }
            (true, false) => {
                probe[j] = x[j] + h;
                let fu = f(&probe)?;
                *evals += 1;
                (fu - fx) / h
            }
            (false, true) => {
                probe[j] = x[j] - h;
                let fd = f(&probe)?;
                *evals += 1;
                (fx - fd) / h
            }
            (false, false) => 0.0,
        };
        probe[j] = x[j];
        g[j] = d;
    }
    Ok(g)
}

/// Sup-norm of the gradient projected onto the feasible directions.
fn projected_grad_norm(x: &[f64], g: &DVector<f64>, lo: &[f64], hi: &[f64]) -> f64 {
    let mut norm: f64 = 0.0;
    for j in 0..x.len() {
        let active_lo = x[j] <= lo[j] && g[j] > 0.0;
        let active_hi = x[j] >= hi[j] && g[j] < 0.0;
        if !(active_lo || active_hi) {
            norm = norm.max(g[j].abs());
        }
    }
    norm
}

/// Minimizes `f` over the box `[lo, hi]` starting from `x0`.
pub fn minimize_in_box<F: FnMut(&[f64]) -> Result<f64>>(
    mut f: F,
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    cfg: &BoxOptimizerCfg,
) -> Result<OptimizerRun> {
    let p = x0.len();
    if lo.len() != p || hi.len() != p {
        return Err(FouGmmError::DimensionMismatch("box bounds vs start point".into()));
    }
    let mut x = x0.to_vec();
    clamp(&mut x, lo, hi);
    let mut evals = 0usize;
    let mut fx = f(&x)?;
    evals += 1;
    let mut g = num_grad(&mut f, &x, fx, lo, hi, &mut evals)?;
    let mut h_inv = DMatrix::<f64>::identity(p, p);
    let mut flat_run = 0usize;

    for iter in 0..cfg.max_iters {
        let pg = projected_grad_norm(&x, &g, lo, hi);
        if pg <= cfg.grad_tol * (1.0 + fx.abs()) {
            return Ok(OptimizerRun {
                x,
                f: fx,
                iterations: iter,
                converged: true,
                grad_norm: pg,
                n_evals: evals,
            });
        }

        // Quasi-Newton direction with bound-blocked components dropped.
        let mut d = -(&h_inv * &g);
        let mut blocked = false;
        for j in 0..p {
            if (x[j] <= lo[j] && d[j] < 0.0) || (x[j] >= hi[j] && d[j] > 0.0) {
                d[j] = 0.0;
                blocked = true;
            }
        }
        let mut descent = g.dot(&d);
        if descent >= 0.0 {
            // Fall back to the projected steepest descent direction.
            d = -g.clone();
            for j in 0..p {
                if (x[j] <= lo[j] && d[j] < 0.0) || (x[j] >= hi[j] && d[j] > 0.0) {
                    d[j] = 0.0;
                }
            }
            descent = g.dot(&d);
            if descent >= 0.0 {
                // No feasible descent direction: box-constrained stationary.
                return Ok(OptimizerRun {
                    x,
                    f: fx,
                    iterations: iter,
                    converged: true,
                    grad_norm: pg,
                    n_evals: evals,
                });
            }
            h_inv = DMatrix::identity(p, p);
        }
        let _ = blocked;

        // Armijo backtracking on the projected path.
        let mut step = 1.0f64;
        let mut accepted = None;
        for _ in 0..50 {
            let mut cand: Vec<f64> = x.iter().zip(d.iter()).map(|(xi, di)| xi + step * di).collect();
            clamp(&mut cand, lo, hi);
            let fc = f(&cand)?;
            evals += 1;
            if fc <= fx + 1e-4 * step * descent || fc < fx * (1.0 - 1e-16) {
                accepted = Some((cand, fc));
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            // Line search failed: gradient noise floor reached.
            return Ok(OptimizerRun {
                x,
                f: fx,
                iterations: iter,
                converged: pg <= 1e3 * cfg.grad_tol * (1.0 + fx.abs()),
                grad_norm: pg,
                n_evals: evals,
            });
        };

        let rel_drop = (fx - f_new).abs() / (1.0 + fx.abs());
        let g_new = num_grad(&mut f, &x_new, f_new, lo, hi, &mut evals)?;

        // BFGS update on the inverse Hessian.
        let s = DVector::from_iterator(p, x_new.iter().zip(&x).map(|(a, b)| a - b));
        let y = &g_new - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            let rho = 1.0 / sy;
            let i = DMatrix::<f64>::identity(p, p);
            let left = &i - rho * &s * y.transpose();
            let right = &i - rho * &y * s.transpose();
            h_inv = &left * h_inv * right + rho * &s * s.transpose();
        }

        x = x_new;
        fx = f_new;
        g = g_new;

        if rel_drop <= cfg.f_tol {
            flat_run += 1;
            if flat_run >= cfg.flat_runs.max(1) {
                let pg = projected_grad_norm(&x, &g, lo, hi);
                return Ok(OptimizerRun {
                    x,
                    f: fx,
                    iterations: iter + 1,
                    converged: true,
                    grad_norm: pg,
                    n_evals: evals,
                });
            }
        } else {
            flat_run = 0;
        }
    }
    let pg = projected_grad_norm(&x, &g, lo, hi);
    Ok(OptimizerRun {
        x,
        f: fx,
        iterations: cfg.max_iters,
        converged: false,
        grad_norm: pg,
        n_evals: evals,
    })
}

/// Deterministic multi-start points: the box center plus `n - 1` midpoint
/// Latin-hypercube points from a seeded permutation stream.
pub fn multistart_points(lo: &[f64], hi: &[f64], n: usize, seed: u64) -> Vec<Vec<f64>> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let p = lo.len();
    let center: Vec<f64> = lo.iter().zip(hi).map(|(&l, &h)| 0.5 * (l + h)).collect();
    let mut points = vec![center];
    if n <= 1 {
        return points;
    }
    let strata = n - 1;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut perms: Vec<Vec<usize>> = Vec::with_capacity(p);
    for _ in 0..p {
        let mut idx: Vec<usize> = (0..strata).collect();
        idx.shuffle(&mut rng);
        perms.push(idx);
    }
    for i in 0..strata {
        let point: Vec<f64> = (0..p)
            .map(|j| {
                let frac = (perms[j][i] as f64 + 0.5) / strata as f64;
                lo[j] + frac * (hi[j] - lo[j])
            })
            .collect();
        points.push(point);
    }
    points
}
