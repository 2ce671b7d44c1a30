// Scratch diagnostic.
use fou_gmm::covmodel::{CovarianceModel, FouModel, FouParams};
use fou_gmm::filters::{sequential_bank, FilterKind};
use fou_gmm::gmm::{g_gradient, omega, MomentSpec};
use nalgebra::DMatrix;

fn main() {
    let truth = FouParams::new(0.55, 1.0, 1.0).unwrap();
    let model = FouModel::new(truth).unwrap();
    let bank = sequential_bank(3, FilterKind::FiniteDifference).unwrap();
    let spec = MomentSpec::new(bank, Box::new(model.clone()), 0.1).unwrap();
    let theta = model.params_vector();
    let g = g_gradient(&spec, &theta).unwrap();
    println!("G = {:.6}", g);
    let (om, info) = omega(&spec, &theta, 20000, 1e-10).unwrap();
    println!("Omega = {:.6e}  (k_used {})", om, info.k_used);
    let a = DMatrix::identity(3, 3);
    let gag = g.transpose() * &a * &g;
    let c = gag.try_inverse().unwrap() * g.transpose() * &a;
    let n_terms = 1001.0 - 4.0 + 1.0;
    let cov = (&c * &om * c.transpose()) / n_terms;
    println!("asym cov diag: H {:.4} lambda {:.4} sigma {:.4}", cov[(0,0)], cov[(1,1)], cov[(2,2)]);
    println!("sum diag (CLT MSE prediction): {:.4}", cov.trace());
    println!("max eigen: {:.4}", cov.symmetric_eigen().eigenvalues.max());
}
