//! Trains the baseline and RECON-P (with play data) on ten static-world
//! demonstrations and compares their closed-loop final distance.

use recon::beacons::{BeaconConfig, BeaconMode, Placement};
use recon::datasets::{collect_demos, collect_play};
use recon::harness::{eval_final_distance, train, Expert, Method, TrainConfig, ZeroPolicy};
use recon::model::{ModelConfig, ReconModel};
use recon::worlds::EnvKind;

fn main() -> recon::Result<()> {
    let env = EnvKind::Static2d;
    let seed = 5;
    let beacon = BeaconConfig::new(BeaconMode::Position, Placement::Exact);
    let demos = collect_demos(env, &beacon, 10, 10, seed)?;
    let play = collect_play(env, &beacon, 500, seed)?;

    let report = |name: &str, v: f64| println!("{name:<16} final distance {v:.3}");
    report("expert", eval_final_distance(&Expert, env, 100, 10, seed).summary.mean);
    report("zero action", eval_final_distance(&ZeroPolicy, env, 100, 10, seed).summary.mean);

    for (method, use_play) in [(Method::Baseline, false), (Method::ReconP, true)] {
        let config = TrainConfig { play: use_play, seed, ..TrainConfig::new(method) };
        let mut model = ReconModel::new(ModelConfig::new(method.model_mode(), env, beacon.dim()).with_seed(seed))?;
        let trained = train(&mut model, &demos, use_play.then_some(&play), &config)?;
        println!(
            "{method}: {} steps, loss {:.3} -> {:.3}",
            trained.steps,
            trained.first_loss().unwrap(),
            trained.final_loss().unwrap()
        );
        let label = if use_play { format!("{method} +play") } else { method.to_string() };
        report(&label, eval_final_distance(&model, env, 100, 10, seed).summary.mean);
    }
    Ok(())
}
