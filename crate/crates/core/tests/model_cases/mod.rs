//! Model measurements shared by the `model_oracles` and `acceptance`
//! test targets.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use recon::beacons::{BeaconConfig, BeaconMode, Placement};
use recon::datasets::{collect_demos, collect_play, DemoBatch, PlayBatch};
use recon::model::{ModelConfig, ModelMode, ReconModel};
use recon::ndgrad::{gaussian_nll, Adam, Tape, Tensor};
use recon::worlds::EnvKind;

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

pub fn static_model(mode: ModelMode, seed: u64) -> ReconModel {
    ReconModel::new(ModelConfig::new(mode, EnvKind::Static2d, 2).with_seed(seed)).unwrap()
}

pub fn demo_batch(seed: u64, rows: usize) -> DemoBatch {
    let beacon = BeaconConfig::new(BeaconMode::Position, Placement::Exact);
    let ds = collect_demos(EnvKind::Static2d, &beacon, rows.div_ceil(10), 10, seed).unwrap();
    ds.gather(&(0..rows).collect::<Vec<_>>())
}

pub fn play_batch(seed: u64, rows: usize) -> PlayBatch {
    let beacon = BeaconConfig::new(BeaconMode::Position, Placement::Exact);
    let ds = collect_play(EnvKind::Static2d, &beacon, rows, seed).unwrap();
    ds.gather(&(0..rows).collect::<Vec<_>>())
}

/// Rows of `y ~ U(-1, 1)` with `b = A y + 0.5` for a fixed random `A`.
pub fn linear_beacon_rows(a: &[f32], width: usize, rows: usize, rng: &mut ChaCha8Rng) -> DemoBatch {
    let y: Vec<f32> = (0..rows * width).map(|_| rng.random_range(-1.0..1.0)).collect();
    let b = (0..rows)
        .flat_map(|r| {
            let y = &y[r * width..(r + 1) * width];
            (0..2).map(move |j| (0..width).map(|i| y[i] * a[i * 2 + j]).sum::<f32>() + 0.5)
        })
        .collect();
    DemoBatch { rows, x: vec![0.0; rows * 2], y, b, u: vec![0.0; rows * 2] }
}

/// Largest relative gap between `total` and `policy + lambda * (beacon + play)`
/// over several weights.
pub fn lambda_decomposition_error() -> f64 {
    let demo = demo_batch(1, 10);
    let play = play_batch(2, 8);
    let mut worst = 0.0f64;
    for lambda in [0.0f32, 0.5, 1.0, 3.0] {
        let mut model = ReconModel::new(
            ModelConfig::new(ModelMode::Recon, EnvKind::Static2d, 2).with_lambda(lambda),
        )
        .unwrap();
        model.fit_normalizer(&demo.y);
        let mut tape = Tape::new();
        let terms = model.combined_loss(&mut tape, &demo, Some(&play)).unwrap();
        let (total, policy) = (tape.item(terms.total), tape.item(terms.policy));
        let beacon = tape.item(terms.beacon.unwrap());
        let play_term = tape.item(terms.play.unwrap());
        let expected = policy + lambda * (beacon + play_term);
        worst = worst.max(((total - expected) / expected).abs() as f64);
    }
    worst
}

/// Largest gap between the baseline's loss and RECON's policy term when
/// both start from the same initialization seed.
pub fn baseline_policy_gap() -> f32 {
    let mut worst = 0.0f32;
    for seed in 0..3 {
        let demo = demo_batch(seed, 10);
        let mut recon = static_model(ModelMode::Recon, seed);
        let mut baseline = static_model(ModelMode::Baseline, seed);
        recon.fit_normalizer(&demo.y);
        baseline.fit_normalizer(&demo.y);
        let mut tape = Tape::new();
        let r = recon.combined_loss(&mut tape, &demo, None).unwrap();
        let b = baseline.combined_loss(&mut tape, &demo, None).unwrap();
        assert!(b.beacon.is_none());
        worst = worst.max((tape.item(b.total) - tape.item(r.policy)).abs());
    }
    worst
}

/// Largest relative error of `gaussian_nll` against `0.5 * sum(e^2) / rows
/// + dim / 2 * ln(2 pi)` for assorted shapes, including the zero-error case.
pub fn gaussian_nll_error() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for (rows, dim, zero) in [(1, 1, true), (3, 2, true), (5, 4, true), (1, 2, false), (4, 3, false), (7, 1, false)] {
        let p: Vec<f32> = (0..rows * dim).map(|_| rng.random_range(-3.0..3.0)).collect();
        let t: Vec<f32> = if zero {
            p.clone()
        } else {
            (0..rows * dim).map(|_| rng.random_range(-3.0..3.0)).collect()
        };
        let sq: f64 = p.iter().zip(&t).map(|(a, b)| ((a - b) as f64).powi(2)).sum();
        let expected = 0.5 * sq / rows as f64 + dim as f64 / 2.0 * LN_2PI;
        let mut tape = Tape::new();
        let pv = tape.constant(&Tensor::new(vec![rows, dim], p));
        let tv = tape.constant(&Tensor::new(vec![rows, dim], t));
        let l = gaussian_nll(&mut tape, pv, tv);
        worst = worst.max(((tape.item(l) as f64 - expected) / expected).abs());
    }
    worst
}

/// Trains on a linearly decodable beacon for 2000 full-batch Adam steps
/// and returns `(held-out RMSE, std of b)`.
pub fn linear_beacon_fit() -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut model = static_model(ModelMode::Recon, 9);
    let width = model.config().obs_len();
    let a: Vec<f32> = (0..width * 2).map(|_| rng.random_range(-2.0..2.0)).collect();
    let train_rows = linear_beacon_rows(&a, width, 256, &mut rng);
    let held_out = linear_beacon_rows(&a, width, 256, &mut rng);
    let adam = Adam::new(1e-3);
    for _ in 0..2000 {
        let mut tape = Tape::new();
        let loss = model.combined_loss(&mut tape, &train_rows, None).unwrap().total;
        model.params_mut().zero_grad();
        tape.backward(loss, model.params_mut());
        adam.step(model.params_mut()).unwrap();
    }
    let mut tape = Tape::new();
    let phi = model.features(&mut tape, &held_out.x, &held_out.y, held_out.rows).unwrap();
    let pred = model.beacon_mean(&mut tape, phi).unwrap();
    let b = &held_out.b;
    let mse = tape.value(pred).iter().zip(b).map(|(p, t)| ((p - t) as f64).powi(2)).sum::<f64>()
        / b.len() as f64;
    let mean = b.iter().map(|&v| v as f64).sum::<f64>() / b.len() as f64;
    let var = b.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / b.len() as f64;
    (mse.sqrt(), var.sqrt())
}
