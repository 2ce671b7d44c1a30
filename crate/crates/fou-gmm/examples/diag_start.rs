// Scratch: start-at-truth + loose f-tolerance hypothesis.
use fou_gmm::covmodel::{CovarianceModel, EstimationBox, FouModel, FouParams};
use fou_gmm::filters::{sequential_bank, FilterKind};
use fou_gmm::gmm::{
    minimize_in_box, resolve_weighting, sample_mean_squares, v_theta, quadratic_form_pub,
    BoxOptimizerCfg, MomentSpec, OptimizerCfg, Weighting,
};
use fou_gmm::sampler::{factorize, sample_path, SeedPlan};

fn cell(h: f64, l: usize, m: usize, f_tol: f64) {
    let truth = FouParams::new(h, 1.0, 1.0).unwrap();
    let model = FouModel::new(truth).unwrap();
    let fact = factorize(&model, 1001, 0.1).unwrap();
    let plan = SeedPlan::new(31337).derive(&[l as u64]);
    let bank = sequential_bank(l, FilterKind::FiniteDifference).unwrap();
    let spec = MomentSpec::new(bank, Box::new(model.clone()), 0.1).unwrap();
    let boxj = EstimationBox::default_joint();
    let (lo, hi) = model.free_bounds(&boxj);
    let truth_vec = model.params_vector();
    let w = if l > 3 {
        Weighting::OracleEfficient(truth_vec.clone())
    } else {
        Weighting::Identity
    };
    let (a, _, _) = resolve_weighting(&spec, &w, &OptimizerCfg::default()).unwrap();
    let cfg = BoxOptimizerCfg { max_iters: 100, grad_tol: 0.0, f_tol, flat_runs: 1 };
    let mut mse = 0.0;
    let mut mean = vec![0.0; 3];
    let mut ests = Vec::new();
    for r in 0..m as u64 {
        let path = sample_path(&fact, &plan, r);
        let ms = sample_mean_squares(&spec, &path).unwrap();
        let mut obj = |th: &[f64]| -> fou_gmm::error::Result<f64> {
            let v = v_theta(&spec, th)?;
            let g: Vec<f64> = ms.iter().zip(v).map(|(m, vi)| m - vi).collect();
            Ok(quadratic_form_pub(&g, &a))
        };
        let run = minimize_in_box(&mut obj, &truth_vec, &lo, &hi, &cfg).unwrap();
        let d2: f64 = run.x.iter().zip(&truth_vec).map(|(a, b)| (a - b) * (a - b)).sum();
        mse += d2;
        for j in 0..3 {
            mean[j] += run.x[j];
        }
        ests.push(run.x);
    }
    mse /= m as f64;
    for v in &mut mean {
        *v /= m as f64;
    }
    let bias2: f64 = mean.iter().zip(&truth_vec).map(|(a, b)| (a - b) * (a - b)).sum();
    println!("H={h} L={l} ftol={f_tol:.1e}: MSE={mse:.4} bias2={bias2:.5}");
}

fn main() {
    for &ft in &[2.22e-9f64, 1e-9, 3e-10, 1e-10, 3e-11] {
        cell(0.55, 3, 100, ft);
    }
}
