//! Variance-rate diagnostics for the order-0 (unfiltered) quadratic
//! variation statistic in the strong-memory regime `H >= 3/4`, where it is
//! no longer asymptotically normal.
//!
//! For `g0 = mean(X_i^2) - rho(0)` over `n` points, Gaussianity gives the
//! exact second moment `E[g0^2] = (2/n^2) sum_{i,j} rho(alpha|i-j|)^2`. The
//! diagnostic scales both this exact value and a Monte Carlo estimate by the
//! appropriate rate (`n / log n` at H = 3/4, `n^{4-4H}` above) and reports
//! the closed-form limit constant under both tail-coefficient conventions.

use crate::covmodel::{tail_coefficient, tail_coefficient_single_lambda, FouModel, FouParams};
use crate::error::{FouGmmError, Result};
use crate::sampler::{factorize, sample_path, SeedPlan};
use rayon::prelude::*;

#[derive(Debug, Clone, Copy)]
pub struct RatePoint {
    pub n: usize,
    /// rate(n) * empirical second moment of g0 over the replications.
    pub scaled_mc_variance: f64,
    /// rate(n) * exact second moment from the covariance double sum.
    pub scaled_exact_variance: f64,
}

#[derive(Debug, Clone)]
pub struct RateReport {
    pub params: FouParams,
    pub alpha: f64,
    pub replications: usize,
    /// Human-readable rate used, e.g. "n^0.6" or "n/log n".
    pub rate_desc: String,
    pub points: Vec<RatePoint>,
    /// Limit constant with the lambda^-2 tail coefficient (the convention
    /// the spectral integral verifies).
    pub limit_lambda_quadratic: f64,
    /// Limit constant with the single-lambda tail coefficient, reported for
    /// comparison only.
    pub limit_lambda_single: f64,
}

fn rate(h: f64, n: usize) -> f64 {
    let nf = n as f64;
    if h == 0.75 {
        nf / nf.ln()
    } else {
        nf.powf(4.0 - 4.0 * h)
    }
}

fn limit_constant(h: f64, alpha: f64, c: f64) -> f64 {
    if h == 0.75 {
        2.0 * c * c / alpha
    } else {
        2.0 * alpha.powf(4.0 * h - 4.0) * c * c / ((2.0 * h - 1.0) * (4.0 * h - 3.0))
    }
}

/// Runs the diagnostic across a grid of sample sizes.
pub fn rate_diagnostic(
    params: FouParams,
    alpha: f64,
    n_grid: &[usize],
    replications: usize,
    base_seed: u64,
) -> Result<RateReport> {
    params.validate()?;
    if params.h < 0.75 {
        return Err(FouGmmError::Domain {
            context: "rate_diagnostic",
            message: format!("H = {} < 3/4: the order-0 statistic is asymptotically normal there", params.h),
        });
    }
    if n_grid.is_empty() || replications < 2 {
        return Err(FouGmmError::InvalidParams("need a nonempty n grid and >= 2 replications".into()));
    }
    let model = FouModel::new(params)?;
    let rho0 = crate::covmodel::fou_var0(&params)?;
    let plan = SeedPlan::new(base_seed);

    let mut points = Vec::with_capacity(n_grid.len());
    for (gi, &n) in n_grid.iter().enumerate() {
        let grid = crate::covmodel::CovarianceModel::rho_lag_grid(&model, alpha, n)?;
        // Exact: (2/n^2) [ n rho(0)^2 + 2 sum_d (n-d) rho(alpha d)^2 ].
        let mut double_sum = n as f64 * grid[0] * grid[0];
        for (d, &g) in grid.iter().enumerate().skip(1) {
            double_sum += 2.0 * (n - d) as f64 * g * g;
        }
        let exact = 2.0 * double_sum / (n as f64 * n as f64);

        let fact = factorize(&model, n, alpha)?;
        let cell_plan = plan.derive(&[gi as u64, n as u64]);
        let second_moment: f64 = (0..replications as u64)
            .into_par_iter()
            .map(|r| {
                let path = sample_path(&fact, &cell_plan, r);
                let mean_sq: f64 =
                    path.values().iter().map(|x| x * x).sum::<f64>() / n as f64;
                let g0 = mean_sq - rho0;
                g0 * g0
            })
            .sum::<f64>()
            / replications as f64;

        let r = rate(params.h, n);
        points.push(RatePoint {
            n,
            scaled_mc_variance: r * second_moment,
            scaled_exact_variance: r * exact,
        });
    }

    let rate_desc = if params.h == 0.75 {
        "n/log n".to_string()
    } else {
        format!("n^{}", 4.0 - 4.0 * params.h)
    };
    Ok(RateReport {
        params,
        alpha,
        replications,
        rate_desc,
        points,
        limit_lambda_quadratic: limit_constant(params.h, alpha, tail_coefficient(&params)),
        limit_lambda_single: limit_constant(
            params.h,
            alpha,
            tail_coefficient_single_lambda(&params),
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_weak_memory() {
        let p = FouParams::new(0.6, 1.0, 1.0).unwrap();
        assert!(rate_diagnostic(p, 0.5, &[128], 8, 1).is_err());
    }

    #[test]
    fn exact_scaled_variance_approaches_limit() {
        // Small grid smoke test: the scaled exact variance should already be
        // within ~15% of the limit constant by n = 2048 for H = 0.85.
        let p = FouParams::new(0.85, 1.0, 1.0).unwrap();
        let report = rate_diagnostic(p, 0.5, &[512, 1024, 2048], 2, 9).unwrap();
        let last = report.points.last().unwrap();
        let rel = (last.scaled_exact_variance - report.limit_lambda_quadratic).abs()
            / report.limit_lambda_quadratic;
        assert!(rel < 0.15, "scaled exact {} vs limit {}", last.scaled_exact_variance, report.limit_lambda_quadratic);
        // With lambda = 1 the two conventions coincide.
        assert_eq!(report.limit_lambda_quadratic, report.limit_lambda_single);
    }

    #[test]
    fn mc_matches_exact_double_sum() {
        let p = FouParams::new(0.85, 1.0, 1.0).unwrap();
        let report = rate_diagnostic(p, 0.5, &[512], 3000, 123).unwrap();
        let pt = &report.points[0];
        let rel = (pt.scaled_mc_variance - pt.scaled_exact_variance).abs() / pt.scaled_exact_variance;
        assert!(rel < 0.2, "MC {} vs exact {}", pt.scaled_mc_variance, pt.scaled_exact_variance);
    }

    #[test]
    fn h_three_quarters_uses_log_rate() {
        let p = FouParams::new(0.75, 1.0, 1.0).unwrap();
        let report = rate_diagnostic(p, 0.5, &[256, 512], 4, 5).unwrap();
        assert_eq!(report.rate_desc, "n/log n");
        assert!(report.points[0].scaled_exact_variance > 0.0);
    }
}
