//! Prints what each beacon placement transmits for one static scene.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use recon::beacons::{measure_calls, BeaconConfig, BeaconMode, Placement};
use recon::worlds::{self, EnvKind};

fn main() {
    let state = worlds::reset(EnvKind::Static2d, 3);
    for (i, p) in state.object_positions().iter().enumerate() {
        let tag = if i == state.task_index() { "  <- task object" } else { "" };
        println!("object {i}: ({:6.2}, {:6.2}){tag}", p[0], p[1]);
    }
    println!();

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut configs: Vec<BeaconConfig> = Placement::ALL
        .iter()
        .map(|&p| BeaconConfig::new(BeaconMode::Position, p))
        .collect();
    configs.push(BeaconConfig::new(BeaconMode::Distance, Placement::Exact));
    configs.push(BeaconConfig::new(BeaconMode::Position, Placement::Exact).with_sigma(2.5));
    for config in configs {
        let placed = config.place(&state, &mut rng);
        let reading = placed.measure(&state, &mut rng).unwrap();
        let objects = placed.tagged_objects(&state).unwrap();
        println!(
            "{:<8} {:<9} sigma {:3}  tags {objects:?}  reading {:?}",
            format!("{:?}", config.mode).to_lowercase(),
            config.placement.name(),
            config.noise_sigma,
            reading.0
        );
    }
    println!("\n{} beacon measurements taken", measure_calls());
}
