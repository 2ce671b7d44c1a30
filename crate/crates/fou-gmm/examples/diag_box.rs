// Scratch: box-width calibration against published table cells.
use fou_gmm::covmodel::{EstimationBox, FouParams};
use fou_gmm::filters::FilterKind;
use fou_gmm::gmm::OptimizerCfg;
use fou_gmm::montecarlo::{run_scenario, CellOutcome, Scenario, WeightingPolicy};

fn run(h: f64, l: usize, m: usize, box_: EstimationBox, tag: &str) {
    let s = Scenario {
        name: format!("cal-{tag}-h{h}-l{l}"),
        params_true: FouParams::new(h, 1.0, 1.0).unwrap(),
        alpha: 0.1,
        n: 1000,
        m,
        l_values: vec![l],
        filter_kind: FilterKind::FiniteDifference,
        weighting: WeightingPolicy::OracleWhenOveridentified,
        fix_lambda: false,
        box_,
        base_seed: 20240817,
        optimizer: OptimizerCfg::default(),
    };
    let report = run_scenario(&s).unwrap();
    for cell in &report.cells {
        if let CellOutcome::Done(c) = cell {
            println!(
                "{tag} H={h} L={} m={m}: MSE={:.4} eVar={:.4} bias2={:.5} fail={} bnd={}",
                c.l, c.mse, c.e_var, c.bias_sq, c.failures, c.boundary_count
            );
        } else {
            println!("{tag} H={h} L={l}: ABORTED");
        }
    }
}

fn main() {
    let tight = EstimationBox::new(
        FouParams::new(0.5, 0.75, 0.2).unwrap(),
        FouParams::new(0.9999, 1.25, 3.0).unwrap(),
    )
    .unwrap();
    run(0.55, 3, 100, tight, "tight");
    run(0.85, 3, 100, tight, "tight");
    run(0.85, 7, 100, tight, "tight");
}
