use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::beacons::BeaconMode;
use crate::datasets::{BatchSampler, DemoDataset, PlayDataset};
use crate::model::{ModelMode, ReconModel};
use crate::ndgrad::{Adam, Tape};
use crate::{Error, Result};

pub const DEFAULT_LR: f32 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "baseline")]
    Baseline,
    /// Position beacons.
    #[serde(rename = "recon-p")]
    ReconP,
    /// Distance beacons.
    #[serde(rename = "recon-d")]
    ReconD,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Baseline => "baseline",
            Method::ReconP => "recon-p",
            Method::ReconD => "recon-d",
        }
    }

    pub fn model_mode(self) -> ModelMode {
        match self {
            Method::Baseline => ModelMode::Baseline,
            Method::ReconP | Method::ReconD => ModelMode::Recon,
        }
    }

    /// Beacon mode the method trains on; `None` for the baseline.
    pub fn beacon_mode(self) -> Option<BeaconMode> {
        match self {
            Method::Baseline => None,
            Method::ReconP => Some(BeaconMode::Position),
            Method::ReconD => Some(BeaconMode::Distance),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "baseline" => Ok(Method::Baseline),
            "recon-p" | "recon_p" | "reconp" => Ok(Method::ReconP),
            "recon-d" | "recon_d" | "recond" => Ok(Method::ReconD),
            _ => Err(format!("unknown method {s:?} (expected baseline, recon-p or recon-d)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub method: Method,
    pub play: bool,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f32,
    pub lambda: f32,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(method: Method) -> Self {
        TrainConfig {
            method,
            play: false,
            epochs: 2000,
            batch_size: 10,
            lr: DEFAULT_LR,
            lambda: 1.0,
            seed: 0,
        }
    }
}

/// Mean losses over one epoch's batches.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub total: f32,
    pub policy: f32,
    pub beacon: Option<f32>,
    pub play: Option<f32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub lr: f32,
    pub epochs: usize,
    pub steps: usize,
    pub play_batches: usize,
    pub trace: Vec<EpochLoss>,
}

impl TrainReport {
    pub fn first_loss(&self) -> Option<f32> {
        self.trace.first().map(|e| e.total)
    }

    pub fn final_loss(&self) -> Option<f32> {
        self.trace.last().map(|e| e.total)
    }

    /// Loss trace as CSV.
    pub fn trace_csv(&self) -> String {
        let opt = |v: Option<f32>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut out = String::from("epoch,total,policy,beacon,play\n");
        for e in &self.trace {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                e.epoch,
                e.total,
                e.policy,
                opt(e.beacon),
                opt(e.play)
            ));
        }
        out
    }
}

fn check_compat(model: &ReconModel, demos: &DemoDataset, play: Option<&PlayDataset>, config: &TrainConfig) -> Result<()> {
    let mc = model.config();
    let dm = &demos.manifest;
    if mc.mode != config.method.model_mode() {
        return Err(Error::contract(format!(
            "method {} needs a {:?} model, got {:?}",
            config.method,
            config.method.model_mode(),
            mc.mode
        )));
    }
    if dm.env != mc.env || dm.obs_shape != mc.obs_shape || dm.n != mc.n {
        return Err(Error::contract(format!(
            "dataset ({} {:?}) does not match model ({} {:?})",
            dm.env, dm.obs_shape, mc.env, mc.obs_shape
        )));
    }
    if let Some(mode) = config.method.beacon_mode() {
        if dm.beacon.mode != mode {
            return Err(Error::contract(format!(
                "method {} trains on {mode:?} beacons but the demonstrations carry {:?}",
                config.method, dm.beacon.mode
            )));
        }
        if dm.d != mc.d {
            return Err(Error::contract(format!(
                "beacon dimension: dataset d = {}, model d = {}",
                dm.d, mc.d
            )));
        }
    }
    if let Some(p) = play {
        if config.method == Method::Baseline {
            return Err(Error::contract("the baseline does not use play data"));
        }
        let pm = &p.manifest;
        if pm.env != mc.env || pm.d != mc.d || pm.beacon.mode != dm.beacon.mode {
            return Err(Error::contract(format!(
                "play data ({}, d = {}, {:?}) does not match demonstrations ({}, d = {}, {:?})",
                pm.env, pm.d, pm.beacon.mode, dm.env, dm.d, dm.beacon.mode
            )));
        }
        if p.is_empty() {
            return Err(Error::contract("play dataset is empty"));
        }
    }
    if config.epochs == 0 {
        return Err(Error::contract("epochs must be positive"));
    }
    Ok(())
}

/// Minibatch Adam on the combined loss. Each step draws one demonstration
/// batch and, when play data is given, one play batch of the same size.
pub fn train(
    model: &mut ReconModel,
    demos: &DemoDataset,
    play: Option<&PlayDataset>,
    config: &TrainConfig,
) -> Result<TrainReport> {
    check_compat(model, demos, play, config)?;
    let mut observations = demos.y.clone();
    if let Some(p) = play {
        observations.extend_from_slice(&p.y);
    }
    model.fit_normalizer(&observations);
    model.set_lambda(config.lambda);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(2);
    let mut demo_sampler = BatchSampler::new(demos.len(), config.batch_size)?;
    let mut play_sampler = match play {
        Some(p) => Some(BatchSampler::new(p.len(), config.batch_size.min(p.len()))?),
        None => None,
    };
    let adam = Adam::new(config.lr);
    let mut report = TrainReport {
        lr: config.lr,
        epochs: config.epochs,
        steps: 0,
        play_batches: 0,
        trace: Vec::with_capacity(config.epochs),
    };

    for epoch in 1..=config.epochs {
        let batches = demo_sampler.batches_per_epoch();
        let (mut total, mut policy, mut beacon, mut play_sum) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for _ in 0..batches {
            let demo_batch = demos.gather(&demo_sampler.next_batch(&mut rng));
            let play_batch = match (play, play_sampler.as_mut()) {
                (Some(p), Some(s)) => Some(p.gather(&s.next_batch(&mut rng))),
                _ => None,
            };
            let mut tape = Tape::new();
            let terms = model.combined_loss(&mut tape, &demo_batch, play_batch.as_ref())?;
            let loss = tape.item(terms.total);
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, loss });
            }
            model.params_mut().zero_grad();
            tape.backward(terms.total, model.params_mut());
            adam.step(model.params_mut())?;

            total += loss as f64;
            policy += tape.item(terms.policy) as f64;
            beacon += terms.beacon.map_or(0.0, |v| tape.item(v) as f64);
            play_sum += terms.play.map_or(0.0, |v| tape.item(v) as f64);
            report.steps += 1;
            report.play_batches += usize::from(play_batch.is_some());
        }
        let mean = |s: f64| (s / batches as f64) as f32;
        let recon = model.mode() == ModelMode::Recon;
        report.trace.push(EpochLoss {
            epoch,
            total: mean(total),
            policy: mean(policy),
            beacon: recon.then(|| mean(beacon)),
            play: (recon && play.is_some()).then(|| mean(play_sum)),
        });
    }
    Ok(report)
}
