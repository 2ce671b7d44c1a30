//! Scenario harness: simulate m replications per cell, fit each, and report
//! the replication metrics MSE-hat, e(Var-hat) and Bias^2-hat by filter
//! count L, in the row/column-block layout of the published tables.

use crate::covmodel::{EstimationBox, FouModel, FouParams};
use crate::error::{FouGmmError, Result};
use crate::filters::{sequential_bank, FilterKind};
use crate::gmm::{
    estimate_from_mean_squares, estimate_with_matrix, resolve_weighting, sample_mean_squares,
    GmmFit, MomentSpec, OptimizerCfg, Weighting,
};
use crate::sampler::{factorize, sample_path, SeedPlan};
use crate::specfun;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Weighting policy resolved per cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightingPolicy {
    Identity,
    /// `A = Omega(theta_true)^{-1}` when L > p, identity otherwise — the
    /// constant-matrix convention of the simulation study.
    OracleWhenOveridentified,
    TwoStep,
}

/// One Monte Carlo scenario: a true parameter point, a sampling grid and the
/// estimation setup swept over a list of filter counts.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub params_true: FouParams,
    pub alpha: f64,
    /// Index of the last observation: paths carry N+1 points.
    pub n: usize,
    pub m: usize,
    pub l_values: Vec<usize>,
    pub filter_kind: FilterKind,
    pub weighting: WeightingPolicy,
    pub fix_lambda: bool,
    pub box_: EstimationBox,
    pub base_seed: u64,
    pub optimizer: OptimizerCfg,
}

impl Scenario {
    fn validate(&self) -> Result<()> {
        self.params_true.validate()?;
        if self.m < 2 {
            return Err(FouGmmError::InvalidParams("need m >= 2 replications".into()));
        }
        if self.l_values.is_empty() {
            return Err(FouGmmError::InvalidParams("no L values".into()));
        }
        let max_taps = self.max_padded_len()?;
        if self.n <= max_taps {
            return Err(FouGmmError::InvalidParams(format!(
                "N = {} not above the padded filter length {max_taps}",
                self.n
            )));
        }
        let b = &self.box_;
        let t = &self.params_true;
        let strictly_inside = t.h > b.lo.h
            && t.h < b.hi.h
            && (self.fix_lambda || (t.lambda > b.lo.lambda && t.lambda < b.hi.lambda))
            && t.sigma > b.lo.sigma
            && t.sigma < b.hi.sigma;
        if !strictly_inside {
            return Err(FouGmmError::InvalidParams(
                "true parameters must lie strictly inside the box".into(),
            ));
        }
        Ok(())
    }

    fn max_padded_len(&self) -> Result<usize> {
        let l_max = *self.l_values.iter().max().unwrap();
        Ok(sequential_bank(l_max, self.filter_kind)?.padded_len())
    }

    fn model(&self) -> Result<FouModel> {
        if self.fix_lambda {
            FouModel::with_fixed_lambda(self.params_true)
        } else {
            FouModel::new(self.params_true)
        }
    }
}

/// Metrics of one (scenario, L) cell over the surviving replications.
#[derive(Debug, Clone)]
pub struct CellMetrics {
    pub l: usize,
    pub mse: f64,
    pub e_var: f64,
    pub bias_sq: f64,
    /// Mean squared scatter around the replication mean (1/m normalization):
    /// mse = bias_sq + scatter exactly.
    pub scatter: f64,
    /// Fraction of replications whose 99% confidence ellipsoid
    /// `(theta_hat - theta)' asym_cov^{-1} (theta_hat - theta) <= chi2_{p,0.99}`
    /// contains the truth.
    pub coverage99: f64,
    pub used: usize,
    pub failures: usize,
    pub boundary_count: usize,
    pub weighting_desc: String,
    pub wall_secs: f64,
    /// Per-replication estimates (free-parameter vectors), surviving fits.
    pub estimates: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub enum CellOutcome {
    Done(CellMetrics),
    /// More than 10% of the replications failed to converge.
    Aborted { l: usize, failures: usize, total: usize },
}

#[derive(Debug, Clone)]
pub struct ScenarioReport {
    pub name: String,
    pub params_true: FouParams,
    pub alpha: f64,
    pub n: usize,
    pub m: usize,
    pub fix_lambda: bool,
    pub cells: Vec<CellOutcome>,
    pub low_replication_warning: bool,
    /// e(Var) uses the (m-1)-normalized empirical covariance.
    pub covariance_normalization: &'static str,
}

/// Runs one scenario: one covariance factorization, then per (L, replication)
/// simulation and fit, in parallel over replications.
pub fn run_scenario(s: &Scenario) -> Result<ScenarioReport> {
    s.validate()?;
    let model = s.model()?;
    let truth_vec = crate::covmodel::CovarianceModel::params_vector(&model);
    let (lo, hi) = model.free_bounds(&s.box_);
    let p = truth_vec.len();

    // One factorization serves every L (same covariance and grid).
    let fact = factorize(&model, s.n + 1, s.alpha)?;
    let scenario_plan = SeedPlan::new(s.base_seed).derive(&[hash_str(&s.name)]);

    let mut cells = Vec::with_capacity(s.l_values.len());
    for &l in &s.l_values {
        let started = Instant::now();
        let bank = sequential_bank(l, s.filter_kind)?;
        let spec = MomentSpec::new(bank, Box::new(model.clone()), s.alpha)?;

        let weighting = match s.weighting {
            WeightingPolicy::Identity => Weighting::Identity,
            WeightingPolicy::OracleWhenOveridentified => {
                if l > p {
                    Weighting::OracleEfficient(truth_vec.clone())
                } else {
                    Weighting::Identity
                }
            }
            WeightingPolicy::TwoStep => Weighting::TwoStep { k_max: s.optimizer.omega_k_max },
        };
        // Data-independent weightings resolve once per cell.
        let resolved = match &weighting {
            Weighting::TwoStep { .. } => None,
            w => Some(resolve_weighting(&spec, w, &s.optimizer)?),
        };

        let cell_plan = scenario_plan.derive(&[l as u64]);
        let fits: Vec<Result<GmmFit>> = (0..s.m as u64)
            .into_par_iter()
            .map(|r| {
                let path = sample_path(&fact, &cell_plan, r);
                let mean_sq = sample_mean_squares(&spec, &path)?;
                let n_terms = spec.n_terms(path.len());
                match &resolved {
                    Some((a, desc, info)) => estimate_with_matrix(
                        &spec,
                        &mean_sq,
                        n_terms,
                        a,
                        desc,
                        *info,
                        &lo,
                        &hi,
                        &s.optimizer,
                    ),
                    None => estimate_from_mean_squares(
                        &spec,
                        &mean_sq,
                        n_terms,
                        &weighting,
                        &lo,
                        &hi,
                        &s.optimizer,
                    ),
                }
            })
            .collect();

        let failures = fits.iter().filter(|f| f.is_err()).count();
        if failures * 10 > s.m {
            cells.push(CellOutcome::Aborted { l, failures, total: s.m });
            continue;
        }
        let good: Vec<&GmmFit> = fits.iter().filter_map(|f| f.as_ref().ok()).collect();
        let weighting_desc = good
            .first()
            .map(|f| f.weighting_desc.clone())
            .unwrap_or_else(|| "n/a".into());
        let metrics = cell_metrics(
            l,
            &good,
            &truth_vec,
            failures,
            weighting_desc,
            started.elapsed().as_secs_f64(),
        )?;
        cells.push(CellOutcome::Done(metrics));
    }

    Ok(ScenarioReport {
        name: s.name.clone(),
        params_true: s.params_true,
        alpha: s.alpha,
        n: s.n,
        m: s.m,
        fix_lambda: s.fix_lambda,
        cells,
        low_replication_warning: s.m < 50,
        covariance_normalization: "m-1",
    })
}

fn cell_metrics(
    l: usize,
    fits: &[&GmmFit],
    truth: &[f64],
    failures: usize,
    weighting_desc: String,
    wall_secs: f64,
) -> Result<CellMetrics> {
    let p = truth.len();
    let m = fits.len();
    if m < 2 {
        return Err(FouGmmError::TooManyFailures { failed: failures, total: m + failures });
    }
    let mut mse = 0.0;
    let mut mean = vec![0.0; p];
    for f in fits {
        let mut d2 = 0.0;
        for j in 0..p {
            let d = f.theta_hat[j] - truth[j];
            d2 += d * d;
            mean[j] += f.theta_hat[j];
        }
        mse += d2;
    }
    mse /= m as f64;
    for mj in &mut mean {
        *mj /= m as f64;
    }
    let bias_sq: f64 = mean.iter().zip(truth).map(|(a, b)| (a - b) * (a - b)).sum();

    let mut scatter = 0.0;
    let mut cov = DMatrix::<f64>::zeros(p, p);
    for f in fits {
        let d = DVector::from_iterator(p, f.theta_hat.iter().zip(&mean).map(|(a, b)| a - b));
        scatter += d.norm_squared();
        cov += &d * d.transpose();
    }
    scatter /= m as f64;
    cov /= (m - 1) as f64;
    let e_var = cov.symmetric_eigen().eigenvalues.max();

    let chi2 = chi_squared_quantile(p, 0.99)?;
    let mut covered = 0usize;
    for f in fits {
        let d = DVector::from_iterator(p, f.theta_hat.iter().zip(truth).map(|(a, b)| a - b));
        if let Some(chol) = nalgebra::Cholesky::new(f.asym_cov.clone()) {
            let w = chol.solve(&d);
            if d.dot(&w) <= chi2 {
                covered += 1;
            }
        }
    }

    Ok(CellMetrics {
        l,
        mse,
        e_var,
        bias_sq,
        scatter,
        coverage99: covered as f64 / m as f64,
        used: m,
        failures,
        boundary_count: fits.iter().filter(|f| f.boundary).count(),
        weighting_desc,
        wall_secs,
        estimates: fits.iter().map(|f| f.theta_hat.clone()).collect(),
    })
}

fn hash_str(s: &str) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x1000_0000_01b3);
    }
    h
}

/// Upper quantile of the chi-squared distribution with `k` degrees of
/// freedom, by bisection on the regularized incomplete gamma.
pub fn chi_squared_quantile(k: usize, level: f64) -> Result<f64> {
    let a = k as f64 / 2.0;
    let mut lo = 0.0;
    let mut hi = 200.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if specfun::reg_lower_incomplete_gamma(a, mid / 2.0)? < level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// A full table: rows H x L, one column block per (lambda, sigma)
/// subscenario, matching the published layout.
#[derive(Debug, Clone)]
pub struct TableSpec {
    pub name: String,
    pub h_values: Vec<f64>,
    /// (lambda, sigma) pairs, one column block each.
    pub subscenarios: Vec<(f64, f64)>,
    pub alpha: f64,
    pub n: usize,
    pub m: usize,
    pub l_values: Vec<usize>,
    pub filter_kind: FilterKind,
    pub weighting: WeightingPolicy,
    pub fix_lambda: bool,
    pub box_: EstimationBox,
    pub base_seed: u64,
    pub optimizer: OptimizerCfg,
}

impl TableSpec {
    pub fn scenarios(&self) -> Result<Vec<Scenario>> {
        let mut out = Vec::new();
        for &h in &self.h_values {
            for &(lambda, sigma) in &self.subscenarios {
                out.push(Scenario {
                    name: format!("{}/h{h}/l{lambda}/s{sigma}", self.name),
                    params_true: FouParams::new(h, lambda, sigma)?,
                    alpha: self.alpha,
                    n: self.n,
                    m: self.m,
                    l_values: self.l_values.clone(),
                    filter_kind: self.filter_kind,
                    weighting: self.weighting,
                    fix_lambda: self.fix_lambda,
                    box_: self.box_,
                    base_seed: self.base_seed,
                    optimizer: self.optimizer,
                });
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct TableReport {
    pub spec_name: String,
    pub subscenarios: Vec<(f64, f64)>,
    /// Reports indexed [h][subscenario].
    pub reports: Vec<Vec<ScenarioReport>>,
    pub h_values: Vec<f64>,
    pub l_values: Vec<usize>,
}

/// Runs the whole grid, cells sequentially (one factorization alive at a
/// time; replications within a cell already run in parallel).
pub fn run_table(t: &TableSpec) -> Result<TableReport> {
    let mut reports = Vec::with_capacity(t.h_values.len());
    for &h in &t.h_values {
        let mut row = Vec::with_capacity(t.subscenarios.len());
        for &(lambda, sigma) in &t.subscenarios {
            let scenario = Scenario {
                name: format!("{}/h{h}/l{lambda}/s{sigma}", t.name),
                params_true: FouParams::new(h, lambda, sigma)?,
                alpha: t.alpha,
                n: t.n,
                m: t.m,
                l_values: t.l_values.clone(),
                filter_kind: t.filter_kind,
                weighting: t.weighting,
                fix_lambda: t.fix_lambda,
                box_: t.box_,
                base_seed: t.base_seed,
                optimizer: t.optimizer,
            };
            row.push(run_scenario(&scenario)?);
        }
        reports.push(row);
    }
    Ok(TableReport {
        spec_name: t.name.clone(),
        subscenarios: t.subscenarios.clone(),
        reports,
        h_values: t.h_values.clone(),
        l_values: t.l_values.clone(),
    })
}

impl TableReport {
    fn cell(&self, hi: usize, si: usize, l: usize) -> Option<&CellMetrics> {
        self.reports[hi][si].cells.iter().find_map(|c| match c {
            CellOutcome::Done(m) if m.l == l => Some(m),
            _ => None,
        })
    }

    /// Markdown table in the published layout.
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# {}\n\n", self.spec_name));
        out.push_str("| H | L |");
        for (lam, sig) in &self.subscenarios {
            out.push_str(&format!(
                " MSE (λ={lam}, σ={sig}) | e(Var) | Bias² |"
            ));
        }
        out.push('\n');
        out.push_str("|---|---|");
        for _ in &self.subscenarios {
            out.push_str("---|---|---|");
        }
        out.push('\n');
        for (hi, h) in self.h_values.iter().enumerate() {
            for &l in &self.l_values {
                out.push_str(&format!("| {h} | {l} |"));
                for si in 0..self.subscenarios.len() {
                    match self.cell(hi, si, l) {
                        Some(m) => out.push_str(&format!(
                            " {:.5} | {:.5} | {:.5} |",
                            m.mse, m.e_var, m.bias_sq
                        )),
                        None => out.push_str(" aborted | - | - |"),
                    }
                }
                out.push('\n');
            }
        }
        out
    }

    /// Long-format CSV: one row per (H, subscenario, L).
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "h,lambda,sigma,l,mse,e_var,bias_sq,coverage99,used,failures,boundary,weighting,wall_secs\n",
        );
        for (hi, h) in self.h_values.iter().enumerate() {
            for (si, (lam, sig)) in self.subscenarios.iter().enumerate() {
                for cell in &self.reports[hi][si].cells {
                    match cell {
                        CellOutcome::Done(m) => out.push_str(&format!(
                            "{h},{lam},{sig},{},{:.8},{:.8},{:.8},{:.4},{},{},{},{},{:.2}\n",
                            m.l,
                            m.mse,
                            m.e_var,
                            m.bias_sq,
                            m.coverage99,
                            m.used,
                            m.failures,
                            m.boundary_count,
                            m.weighting_desc,
                            m.wall_secs
                        )),
                        CellOutcome::Aborted { l, failures, total } => out.push_str(&format!(
                            "{h},{lam},{sig},{l},aborted,,,,,{failures}/{total},,,\n"
                        )),
                    }
                }
            }
        }
        out
    }
}

/// Expected value for one table cell, used by the `--check` mode.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Expectation {
    pub h: f64,
    pub lambda: f64,
    pub sigma: f64,
    pub l: usize,
    /// Expected MSE-hat.
    pub mse: f64,
    /// Relative tolerance, e.g. 0.3 for +-30%.
    pub rel_tol: f64,
}

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub expectation: Expectation,
    pub observed: Option<f64>,
    pub pass: bool,
}

/// Compares a finished table against expectations.
pub fn check_table(report: &TableReport, expectations: &[Expectation]) -> Vec<CheckResult> {
    expectations
        .iter()
        .map(|e| {
            let hi = report.h_values.iter().position(|&h| h == e.h);
            let si = report
                .subscenarios
                .iter()
                .position(|&(l, s)| l == e.lambda && s == e.sigma);
            let observed = match (hi, si) {
                (Some(hi), Some(si)) => report.cell(hi, si, e.l).map(|m| m.mse),
                _ => None,
            };
            let pass = observed
                .map(|o| (o - e.mse).abs() <= e.rel_tol * e.mse)
                .unwrap_or(false);
            CheckResult { expectation: e.clone(), observed, pass }
        })
        .collect()
}
