//! Daubechies scaling/wavelet coefficients computed by spectral
//! factorization of the Daubechies polynomial, so no tabulated constants are
//! embedded. Root selection inside the unit circle yields the standard
//! minimum-phase family; db2 is pinned against its closed-form coefficients
//! in the tests.

use crate::error::{FouGmmError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
struct C {
    re: f64,
    im: f64,
}

impl C {
    const ZERO: C = C { re: 0.0, im: 0.0 };
    const ONE: C = C { re: 1.0, im: 0.0 };

    fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }

    fn add(self, o: C) -> C {
        C::new(self.re + o.re, self.im + o.im)
    }

    fn sub(self, o: C) -> C {
        C::new(self.re - o.re, self.im - o.im)
    }

    fn mul(self, o: C) -> C {
        C::new(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)
    }

    fn div(self, o: C) -> C {
        let d = o.re * o.re + o.im * o.im;
        C::new((self.re * o.re + self.im * o.im) / d, (self.im * o.re - self.re * o.im) / d)
    }

    fn abs(self) -> f64 {
        self.re.hypot(self.im)
    }

    fn sqrt(self) -> C {
        let r = self.abs();
        let re = ((r + self.re) / 2.0).max(0.0).sqrt();
        let im = ((r - self.re) / 2.0).max(0.0).sqrt();
        C::new(re, if self.im >= 0.0 { im } else { -im })
    }
}

/// All roots of a complex polynomial (ascending coefficients) by
/// Durand-Kerner iteration.
fn polynomial_roots(coeffs: &[C]) -> Result<Vec<C>> {
    let n = coeffs.len() - 1;
    if n == 0 {
        return Ok(Vec::new());
    }
    let lead = coeffs[n];
    let monic: Vec<C> = coeffs.iter().map(|c| c.div(lead)).collect();
    let eval = |z: C| {
        let mut acc = C::ZERO;
        for &c in monic.iter().rev() {
            acc = acc.mul(z).add(c);
        }
        acc
    };
    let mut roots: Vec<C> = (0..n)
        .map(|i| {
            let seed = C::new(0.4, 0.9);
            let mut z = C::ONE;
            for _ in 0..=i {
                z = z.mul(seed);
            }
            z
        })
        .collect();
    for _ in 0..500 {
        let mut moved: f64 = 0.0;
        for i in 0..n {
            let mut denom = C::ONE;
            for j in 0..n {
                if j != i {
                    denom = denom.mul(roots[i].sub(roots[j]));
                }
            }
            let delta = eval(roots[i]).div(denom);
            roots[i] = roots[i].sub(delta);
            moved = moved.max(delta.abs());
        }
        if moved < 1e-15 {
            return Ok(roots);
        }
    }
    Err(FouGmmError::NonConvergentQuadrature(
        "Durand-Kerner root finding stalled".into(),
    ))
}

/// Scaling (low-pass) coefficients of the Daubechies family with `n`
/// vanishing moments, normalized so the sum is sqrt(2). Length `2n`.
pub fn scaling_coefficients(n: usize) -> Result<Vec<f64>> {
    if !(1..=10).contains(&n) {
        return Err(FouGmmError::Domain {
            context: "daubechies",
            message: format!("{n} vanishing moments unsupported (1..=10)"),
        });
    }
    // P(y) = sum_{k<n} C(n-1+k, k) y^k; |L|^2 = P(sin^2(xi/2)).
    let mut p = vec![C::ZERO; n];
    let mut c = 1.0_f64;
    for (k, slot) in p.iter_mut().enumerate() {
        *slot = C::new(c, 0.0);
        c *= (n + k) as f64 / (k + 1) as f64;
    }
    let y_roots = polynomial_roots(&p)?;

    // Each y-root gives z^2 + (4y - 2) z + 1 = 0; keep the root inside the
    // unit circle (minimum phase).
    let mut z_roots = Vec::with_capacity(y_roots.len());
    for y in y_roots {
        let b = y.mul(C::new(4.0, 0.0)).sub(C::new(2.0, 0.0));
        let disc = b.mul(b).sub(C::new(4.0, 0.0)).sqrt();
        let z1 = C::new(-0.5, 0.0).mul(b.add(disc));
        let z2 = C::new(-0.5, 0.0).mul(b.sub(disc));
        z_roots.push(if z1.abs() < 1.0 { z1 } else { z2 });
    }

    // h(z) = ((1+z)/2)^n * prod (z - z_j), then rescale to sum sqrt(2).
    let mut poly = vec![C::ONE];
    for _ in 0..n {
        poly = poly_mul(&poly, &[C::new(0.5, 0.0), C::new(0.5, 0.0)]);
    }
    for zr in z_roots {
        poly = poly_mul(&poly, &[C::new(-zr.re, -zr.im), C::ONE]);
    }
    let sum: f64 = poly.iter().map(|c| c.re).sum();
    let scale = std::f64::consts::SQRT_2 / sum;
    // Ascending-power coefficients with roots inside the unit circle put the
    // energy at the back; the standard (front-loaded) sequence is the reverse.
    let h: Vec<f64> = poly.iter().rev().map(|c| c.re * scale).collect();
    debug_assert_eq!(h.len(), 2 * n);
    let imag_leak: f64 = poly.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
    if imag_leak * scale.abs() > 1e-9 {
        return Err(FouGmmError::NonConvergentQuadrature(format!(
            "spectral factorization left imaginary residue {imag_leak:.3e}"
        )));
    }
    Ok(h)
}

fn poly_mul(a: &[C], b: &[C]) -> Vec<C> {
    let mut out = vec![C::ZERO; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] = out[i + j].add(x.mul(y));
        }
    }
    out
}

/// Wavelet (high-pass) coefficients: `g_k = (-1)^k h_{2n-1-k}`.
pub fn wavelet_coefficients(n: usize) -> Result<Vec<f64>> {
    let h = scaling_coefficients(n)?;
    let m = h.len();
    Ok((0..m)
        .map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign * h[m - 1 - k]
        })
        .collect())
}
