//! A reduced placement sweep on the dynamic world: a handful of cells,
//! two repetitions and a short training budget, printed as CSV.

use recon::beacons::Placement;
use recon::harness::{run_experiment_with, CellSpec, ExperimentSpec, Method};
use recon::worlds::EnvKind;

fn main() {
    let mut spec = ExperimentSpec::new("sweep", EnvKind::Dynamic2d);
    spec.cells = vec![CellSpec::baseline(10)];
    for p in [Placement::Exact, Placement::Other, Placement::Random] {
        spec.cells.push(CellSpec::recon(Method::ReconP, false, p, 0.0, 10));
    }
    spec.reps = 2;
    spec.budget.epochs = 30;
    spec.eval_configs = 20;

    let results = run_experiment_with(&spec, |cell, run| {
        eprintln!("{:<18} rep {} -> {:?} ({})", cell.label(), run.rep, run.value, run.status);
    });
    for (i, cell) in spec.cells.iter().enumerate() {
        let s = results.cell_summary(i);
        println!("{:<18} reward {:.3} +- {:.3}", cell.label(), s.mean, s.std);
    }
    println!("\n{}", results.to_csv());
    println!("beacon measurements during evaluation: {}", results.total_eval_beacon_calls());
}
