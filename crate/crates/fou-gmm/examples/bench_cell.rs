// Scratch benchmark (will be replaced by real examples).
use fou_gmm::covmodel::{EstimationBox, FouParams};
use fou_gmm::filters::FilterKind;
use fou_gmm::gmm::OptimizerCfg;
use fou_gmm::montecarlo::{run_scenario, CellOutcome, Scenario, WeightingPolicy};
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let h: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(0.55);
    let l: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(3);
    let m: usize = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(200);
    let s = Scenario {
        name: format!("bench-h{h}-l{l}"),
        params_true: FouParams::new(h, 1.0, 1.0).unwrap(),
        alpha: 0.1,
        n: 1000,
        m,
        l_values: vec![l],
        filter_kind: FilterKind::FiniteDifference,
        weighting: WeightingPolicy::OracleWhenOveridentified,
        fix_lambda: false,
        box_: EstimationBox::default_joint(),
        base_seed: 20240817,
        optimizer: OptimizerCfg::default(),
    };
    let t0 = Instant::now();
    let report = run_scenario(&s).unwrap();
    for cell in &report.cells {
        match cell {
            CellOutcome::Done(c) => println!(
                "H={h} L={} m={m}: MSE={:.4} eVar={:.4} bias2={:.5} cov99={:.3} fail={} bnd={} [{}] {:.1}s",
                c.l, c.mse, c.e_var, c.bias_sq, c.coverage99, c.failures, c.boundary_count, c.weighting_desc, t0.elapsed().as_secs_f64()
            ),
            CellOutcome::Aborted { l, failures, total } => {
                println!("H={h} L={l}: ABORTED {failures}/{total}")
            }
        }
    }
}
