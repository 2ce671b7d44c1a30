// Scratch diagnostic.
use fou_gmm::covmodel::{CovarianceModel, EstimationBox, FouModel, FouParams};
use fou_gmm::filters::sequential_bank;
use fou_gmm::filters::FilterKind;
use fou_gmm::gmm::{estimate, objective, sample_mean_squares, v_theta, MomentSpec, OptimizerCfg, Weighting};
use fou_gmm::sampler::{factorize, sample_path, SeedPlan};
use nalgebra::DMatrix;

fn main() {
    let truth = FouParams::new(0.55, 1.0, 1.0).unwrap();
    let model = FouModel::new(truth).unwrap();
    let fact = factorize(&model, 1001, 0.1).unwrap();
    let plan = SeedPlan::new(777);
    let ident = DMatrix::identity(3, 3);
    for rep in 0..8u64 {
        let path = sample_path(&fact, &plan, rep);
        let bank = sequential_bank(3, FilterKind::FiniteDifference).unwrap();
        let spec = MomentSpec::new(bank, Box::new(model.clone()), 0.1).unwrap();
        let (lo, hi) = model.free_bounds(&EstimationBox::default_joint());
        let fit = estimate(&spec, &path, &Weighting::Identity, &lo, &hi, &OptimizerCfg::default()).unwrap();
        let q_truth = objective(&spec, &path, &model.params_vector(), &ident).unwrap();
        let ms = sample_mean_squares(&spec, &path).unwrap();
        let v_true = v_theta(&spec, &model.params_vector()).unwrap();
        println!(
            "rep {rep}: th=({:.4},{:.4},{:.4}) Q={:.3e} Qtruth={:.3e} bnd={} it={} ev={} | ms={:.5?} vtrue={:.5?}",
            fit.theta_hat[0], fit.theta_hat[1], fit.theta_hat[2], fit.objective, q_truth,
            fit.boundary, fit.iterations, fit.n_evals, ms, v_true
        );
    }
}
