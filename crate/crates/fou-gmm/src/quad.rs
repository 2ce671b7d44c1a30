//! Numerical integration helpers: adaptive Gauss-Kronrod quadrature and an
//! averaging accelerator for alternating series of half-period integrals.

use crate::error::{FouGmmError, Result};

// 7-15 Gauss-Kronrod pair (QUADPACK dqk15 nodes and weights).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_2,
    0.063_092_092_629_978_6,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One Gauss-Kronrod 7-15 panel on `[a, b]`; returns (integral, error estimate).
pub fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let f_center = f(c);
    let mut kronrod = WGK[7] * f_center;
    let mut gauss = WG[3] * f_center;
    for i in 0..7 {
        let dx = h * XGK[i];
        let fsum = f(c - dx) + f(c + dx);
        kronrod += WGK[i] * fsum;
        if i % 2 == 1 {
            gauss += WG[i / 2] * fsum;
        }
    }
    kronrod *= h;
    gauss *= h;
    (kronrod, (kronrod - gauss).abs())
}

/// Globally adaptive quadrature on top of [`gk15`]: the panel with the
/// largest error estimate is bisected until the summed error estimate drops
/// below the absolute tolerance `tol`. Worst-first refinement handles
/// integrable endpoint singularities without a tolerance-halving cascade.
pub fn adaptive_gk<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    const MAX_PANELS: usize = 8192;

    struct Panel {
        err: f64,
        a: f64,
        b: f64,
        val: f64,
    }
    impl PartialEq for Panel {
        fn eq(&self, other: &Self) -> bool {
            self.err == other.err
        }
    }
    impl Eq for Panel {}
    impl PartialOrd for Panel {
        fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(other))
        }
    }
    impl Ord for Panel {
        fn cmp(&self, other: &Self) -> std::cmp::Ordering {
            self.err.total_cmp(&other.err)
        }
    }

    let (val, err) = gk15(f, a, b);
    let mut heap = std::collections::BinaryHeap::new();
    heap.push(Panel { err, a, b, val });
    let mut sum_val = val;
    let mut sum_err = err;
    // Panels refined down to roundoff are parked here.
    let mut settled_err = 0.0;

    while sum_err + settled_err > tol {
        let worst = match heap.pop() {
            Some(p) => p,
            None => break,
        };
        let m = 0.5 * (worst.a + worst.b);
        let at_roundoff = m <= worst.a || m >= worst.b || worst.err <= 4.0 * f64::EPSILON * worst.val.abs();
        if at_roundoff {
            sum_err -= worst.err;
            settled_err += worst.err.min(f64::EPSILON * worst.val.abs().max(1e-300));
            continue;
        }
        if heap.len() + 1 >= MAX_PANELS {
            return Err(FouGmmError::NonConvergentQuadrature(format!(
                "adaptive GK15 panel budget exhausted on [{a}, {b}], err {:.3e} > tol {tol:.3e}",
                sum_err + settled_err
            )));
        }
        let (lv, le) = gk15(f, worst.a, m);
        let (rv, re) = gk15(f, m, worst.b);
        sum_val += lv + rv - worst.val;
        sum_err += le + re - worst.err;
        heap.push(Panel { err: le, a: worst.a, b: m, val: lv });
        heap.push(Panel { err: re, a: m, b: worst.b, val: rv });
    }
    Ok(sum_val)
}

/// Sums an eventually-alternating series of segment integrals with repeated
/// averaging of partial sums (Euler-style acceleration).
///
/// `term(j)` returns the j-th signed term. Terms are consumed until the
/// accelerated estimate stabilizes below `tol` (absolute), comparing two
/// consecutive window estimates. Acceleration only starts once term
/// magnitudes have begun to decrease, so an initial hump (amplitude peak of
/// the spectral density) is summed directly.
pub struct AlternatingAccel {
    partials: Vec<f64>,
    sum: f64,
    prev_abs: f64,
    decreasing_run: usize,
    window: usize,
}

impl AlternatingAccel {
    pub fn new(window: usize) -> Self {
        Self {
            partials: Vec::with_capacity(window + 1),
            sum: 0.0,
            prev_abs: f64::INFINITY,
            decreasing_run: 0,
            window,
        }
    }

    /// Feed one term; returns `Some(estimate)` once converged below `tol`.
    pub fn push(&mut self, term: f64, tol: f64) -> Option<f64> {
        self.sum += term;
        let abs = term.abs();
        if abs <= self.prev_abs {
            self.decreasing_run += 1;
        } else {
            self.decreasing_run = 0;
            self.partials.clear();
        }
        self.prev_abs = abs;
        // Plain convergence without acceleration.
        if abs < tol && self.decreasing_run >= 2 {
            return Some(self.sum);
        }
        if self.decreasing_run >= 3 {
            self.partials.push(self.sum);
            if self.partials.len() > self.window {
                self.partials.remove(0);
            }
            if self.partials.len() >= 6 {
                let (est, err) = Self::pyramid(&self.partials);
                if err < tol {
                    return Some(est);
                }
            }
        }
        None
    }

    /// Averaging pyramid over a window of partial sums; returns (estimate,
    /// spread of the deepest two levels as the error estimate).
    fn pyramid(partials: &[f64]) -> (f64, f64) {
        let mut v = partials.to_vec();
        let mut prev = *v.last().unwrap();
        let mut est = prev;
        let mut err = f64::INFINITY;
        while v.len() > 1 {
            for i in 0..v.len() - 1 {
                v[i] = 0.5 * (v[i] + v[i + 1]);
            }
            v.pop();
            est = *v.last().unwrap();
            err = (est - prev).abs();
            prev = est;
        }
        (est, err)
    }
}
