//! The three-network model: a feature network mapping observations to a
//! `k`-wide feature vector, a policy head reading `(x, features)`, and a
//! beacon head decoding beacon readings from the features alone.
//!
//! Both heads are unit-variance Gaussians, so their negative log-likelihoods
//! are half squared errors plus a constant. Training minimizes the sum of the
//! action term and `lambda` times the beacon term. The baseline variant drops
//! the beacon head entirely.

use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::blob;
use crate::datasets::{DemoBatch, PlayBatch};
use crate::ndgrad::{self, gaussian_nll, Cnn, CnnHead, ConvStage, Mlp, ParamStore, Tape, Tensor, Var};
use crate::worlds::{EnvKind, ObsKind, Observation, Vec2, ROBOT_DIM, WORLD_HALF_EXTENT};
use crate::{Error, Result};

pub const MODEL_MANIFEST: &str = "model.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelMode {
    Recon,
    Baseline,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub mode: ModelMode,
    pub env: EnvKind,
    pub n: usize,
    pub obs_shape: Vec<usize>,
    /// Beacon dimension; ignored by the baseline.
    pub d: usize,
    /// Feature width.
    pub k: usize,
    pub feature_hidden: Vec<usize>,
    pub policy_hidden: Vec<usize>,
    pub beacon_hidden: Vec<usize>,
    pub conv_stages: Vec<ConvStage>,
    #[serde(default)]
    pub cnn_head: CnnHead,
    /// Weight of the beacon term.
    pub lambda: f32,
    /// Feed the robot state into the vector feature network as well.
    pub feature_uses_x: bool,
    pub init_seed: u64,
}

impl ModelConfig {
    /// Defaults: `k = 4` for the static world, `k = 8` for the dynamic one.
    pub fn new(mode: ModelMode, env: EnvKind, d: usize) -> Self {
        ModelConfig {
            mode,
            env,
            n: ROBOT_DIM,
            obs_shape: env.obs_shape(),
            d,
            k: match env {
                EnvKind::Static2d => 4,
                EnvKind::Dynamic2d => 8,
            },
            feature_hidden: vec![64, 64],
            policy_hidden: vec![64, 64],
            beacon_hidden: vec![],
            conv_stages: vec![
                ConvStage { out_channels: 8, kernel: 3, stride: 2, padding: 1 },
                ConvStage { out_channels: 16, kernel: 3, stride: 2, padding: 1 },
            ],
            cnn_head: CnnHead::SpatialMoments,
            lambda: 1.0,
            feature_uses_x: false,
            init_seed: 0,
        }
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.init_seed = seed;
        self
    }

    pub fn with_lambda(mut self, lambda: f32) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn obs_len(&self) -> usize {
        self.obs_shape.iter().product()
    }
}

/// Per-coordinate affine map applied to vector observations; identity for images.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObsNormalizer {
    pub shift: Vec<f32>,
    pub scale: Vec<f32>,
}

impl ObsNormalizer {
    pub fn identity(width: usize) -> Self {
        ObsNormalizer {
            shift: vec![0.0; width],
            scale: vec![1.0; width],
        }
    }

    /// Zero mean, unit variance per coordinate over `rows` (row-major).
    /// Coordinates with (near) zero spread keep unit scale.
    pub fn fit(rows: &[f32], width: usize) -> Self {
        let count = rows.len() / width;
        if count == 0 {
            return ObsNormalizer::identity(width);
        }
        let mut shift = vec![0.0f32; width];
        let mut scale = vec![1.0f32; width];
        for j in 0..width {
            let col = rows.iter().skip(j).step_by(width).map(|&v| v as f64);
            let mean = col.clone().sum::<f64>() / count as f64;
            let var = col.map(|v| (v - mean).powi(2)).sum::<f64>() / count as f64;
            shift[j] = mean as f32;
            if var.sqrt() > 1e-6 {
                scale[j] = var.sqrt() as f32;
            }
        }
        ObsNormalizer { shift, scale }
    }

    pub fn apply(&self, rows: &[f32]) -> Vec<f32> {
        let w = self.shift.len();
        rows.iter()
            .enumerate()
            .map(|(i, v)| (v - self.shift[i % w]) / self.scale[i % w])
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FeatureNet {
    Mlp(Mlp),
    Cnn(Cnn),
}

/// Feature network, policy head, and (in RECON mode) beacon head.
#[derive(Clone, Debug, PartialEq)]
pub struct ReconModel {
    config: ModelConfig,
    store: ParamStore,
    feature: FeatureNet,
    policy: Mlp,
    beacon: Option<Mlp>,
    normalizer: ObsNormalizer,
    /// Free-form provenance written into checkpoints.
    pub labels: BTreeMap<String, String>,
}

/// Scalar loss nodes produced by [`ReconModel::combined_loss`].
#[derive(Clone, Copy, Debug)]
pub struct LossTerms {
    pub total: Var,
    pub policy: Var,
    /// Mean beacon NLL over the demonstration batch.
    pub beacon: Option<Var>,
    /// Mean beacon NLL over the play batch.
    pub play: Option<Var>,
}

fn check_width(what: &str, got: usize, rows: usize, width: usize) -> Result<()> {
    if got != rows * width {
        return Err(Error::contract(format!(
            "{what}: expected {rows} rows of width {width} ({} values), got {got}",
            rows * width
        )));
    }
    Ok(())
}

impl ReconModel {
    pub fn new(config: ModelConfig) -> Result<Self> {
        if config.mode == ModelMode::Recon && config.k <= config.d {
            return Err(Error::FeatureWidth {
                k: config.k,
                d: config.d,
            });
        }
        if config.k == 0 || config.n != ROBOT_DIM || config.obs_shape != config.env.obs_shape() {
            return Err(Error::contract(format!(
                "invalid model dimensions: n = {}, k = {}, observation {:?} for {}",
                config.n, config.k, config.obs_shape, config.env
            )));
        }
        if config.feature_uses_x && config.env.obs_kind() == ObsKind::Image {
            return Err(Error::contract("feature_uses_x is only supported for vector observations"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
        let mut store = ParamStore::new();
        let feature = match config.env.obs_kind() {
            ObsKind::Vector => {
                let input = config.obs_len() + if config.feature_uses_x { config.n } else { 0 };
                let widths = [&[input][..], &config.feature_hidden, &[config.k]].concat();
                FeatureNet::Mlp(Mlp::new(&mut store, "feature", &widths, &mut rng))
            }
            ObsKind::Image => {
                let s = &config.obs_shape;
                FeatureNet::Cnn(Cnn::new(
                    &mut store,
                    "feature",
                    [s[0], s[1], s[2]],
                    &config.conv_stages,
                    config.cnn_head,
                    config.k,
                    &mut rng,
                ))
            }
        };
        let widths = [&[config.n + config.k][..], &config.policy_hidden, &[config.n]].concat();
        let policy = Mlp::new(&mut store, "policy", &widths, &mut rng);
        let beacon = (config.mode == ModelMode::Recon).then(|| {
            let widths = [&[config.k][..], &config.beacon_hidden, &[config.d]].concat();
            Mlp::new(&mut store, "beacon", &widths, &mut rng)
        });
        let normalizer = ObsNormalizer::identity(config.obs_len());
        Ok(ReconModel {
            config,
            store,
            feature,
            policy,
            beacon,
            normalizer,
            labels: BTreeMap::new(),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn mode(&self) -> ModelMode {
        self.config.mode
    }

    pub fn set_lambda(&mut self, lambda: f32) {
        self.config.lambda = lambda;
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn normalizer(&self) -> &ObsNormalizer {
        &self.normalizer
    }

    /// Fits the observation normalizer on training observations. Images
    /// stay in `[0, 1]` unchanged.
    pub fn fit_normalizer(&mut self, observations: &[f32]) {
        if self.config.env.obs_kind() == ObsKind::Vector {
            self.normalizer = ObsNormalizer::fit(observations, self.config.obs_len());
        }
    }

    pub fn set_normalizer(&mut self, normalizer: ObsNormalizer) -> Result<()> {
        if normalizer.shift.len() != self.config.obs_len() || normalizer.scale.len() != self.config.obs_len() {
            return Err(Error::contract("normalizer width does not match observation width"));
        }
        self.normalizer = normalizer;
        Ok(())
    }

    fn robot_input(&self, tape: &mut Tape, x: &[f32], rows: usize) -> Var {
        let scaled = x.iter().map(|v| v / WORLD_HALF_EXTENT).collect();
        tape.constant(&Tensor::new(vec![rows, self.config.n], scaled))
    }

    /// Feature vectors `[rows, k]` for row-major robot states and observations.
    pub fn features(&self, tape: &mut Tape, x: &[f32], y: &[f32], rows: usize) -> Result<Var> {
        let cfg = &self.config;
        check_width("robot state", x.len(), rows, cfg.n)?;
        check_width("observation", y.len(), rows, cfg.obs_len())?;
        Ok(match &self.feature {
            FeatureNet::Mlp(mlp) => {
                let obs = Tensor::new(vec![rows, cfg.obs_len()], self.normalizer.apply(y));
                let mut input = tape.constant(&obs);
                if cfg.feature_uses_x {
                    let xv = self.robot_input(tape, x, rows);
                    input = tape.concat(xv, input);
                }
                mlp.forward(tape, &self.store, input)
            }
            FeatureNet::Cnn(cnn) => {
                let shape = [&[rows][..], &cfg.obs_shape].concat();
                let img = tape.constant(&Tensor::new(shape, y.to_vec()));
                cnn.forward(tape, &self.store, img)
            }
        })
    }

    /// Mean action `[rows, n]` given robot state and features.
    pub fn policy_mean(&self, tape: &mut Tape, x: &[f32], phi: Var) -> Result<Var> {
        let rows = tape.shape(phi)[0];
        check_width("robot state", x.len(), rows, self.config.n)?;
        let xv = self.robot_input(tape, x, rows);
        let input = tape.concat(xv, phi);
        Ok(self.policy.forward(tape, &self.store, input))
    }

    /// Mean beacon reading `[rows, d]` decoded from features.
    pub fn beacon_mean(&self, tape: &mut Tape, phi: Var) -> Result<Var> {
        let head = self.beacon.as_ref().ok_or_else(|| {
            Error::contract("the baseline model has no beacon head")
        })?;
        Ok(head.forward(tape, &self.store, phi))
    }

    /// `-log pi(u | x, phi)`, averaged over rows.
    pub fn policy_nll(&self, tape: &mut Tape, x: &[f32], phi: Var, u: &[f32]) -> Result<Var> {
        let rows = tape.shape(phi)[0];
        check_width("action", u.len(), rows, self.config.n)?;
        let mean = self.policy_mean(tape, x, phi)?;
        let target = tape.constant(&Tensor::new(vec![rows, self.config.n], u.to_vec()));
        Ok(gaussian_nll(tape, mean, target))
    }

    /// `-log h(b | phi)`, averaged over rows.
    pub fn beacon_nll(&self, tape: &mut Tape, phi: Var, b: &[f32]) -> Result<Var> {
        let rows = tape.shape(phi)[0];
        let mean = self.beacon_mean(tape, phi)?;
        check_width("beacon reading", b.len(), rows, self.config.d)?;
        let target = tape.constant(&Tensor::new(vec![rows, self.config.d], b.to_vec()));
        Ok(gaussian_nll(tape, mean, target))
    }

    /// Mean action NLL plus `lambda` times the mean beacon NLL on the
    /// demonstration batch and, if given, on the play batch. The baseline
    /// uses the action term only.
    pub fn combined_loss(
        &self,
        tape: &mut Tape,
        demo: &DemoBatch,
        play: Option<&PlayBatch>,
    ) -> Result<LossTerms> {
        let phi = self.features(tape, &demo.x, &demo.y, demo.rows)?;
        let policy = self.policy_nll(tape, &demo.x, phi, &demo.u)?;
        if self.config.mode == ModelMode::Baseline {
            return Ok(LossTerms { total: policy, policy, beacon: None, play: None });
        }
        let lambda = self.config.lambda;
        let beacon = self.beacon_nll(tape, phi, &demo.b)?;
        let weighted = tape.scale(beacon, lambda);
        let mut total = tape.add(policy, weighted);
        let play_term = match play {
            Some(pb) => {
                // play rows carry no robot state; the default feature net ignores it
                let zeros = vec![0.0; pb.rows * self.config.n];
                let phi_play = self.features(tape, &zeros, &pb.y, pb.rows)?;
                let term = self.beacon_nll(tape, phi_play, &pb.b)?;
                let weighted = tape.scale(term, lambda);
                total = tape.add(total, weighted);
                Some(term)
            }
            None => None,
        };
        Ok(LossTerms { total, policy, beacon: Some(beacon), play: play_term })
    }

    /// Mean action for one robot state and observation. No beacon input exists.
    pub fn act(&self, x: Vec2, y: &Observation) -> Result<Vec2> {
        let mut tape = Tape::new();
        let phi = self.features(&mut tape, &x, y.as_slice(), 1)?;
        let mean = self.policy_mean(&mut tape, &x, phi)?;
        let v = tape.value(mean);
        Ok([v[0], v[1]])
    }

    /// Feature vector for one robot state and observation.
    pub fn feature_vector(&self, x: Vec2, y: &Observation) -> Result<Vec<f32>> {
        let mut tape = Tape::new();
        let phi = self.features(&mut tape, &x, y.as_slice(), 1)?;
        Ok(tape.value(phi).to_vec())
    }

    /// Writes `model.json` and the parameter blobs into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        ndgrad::io::save_params(&self.store, dir)?;
        let manifest = ModelManifest {
            config: self.config.clone(),
            normalizer: self.normalizer.clone(),
            labels: self.labels.clone(),
        };
        blob::write_json(&dir.join(MODEL_MANIFEST), &manifest)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest: ModelManifest = blob::read_json(&dir.join(MODEL_MANIFEST))?;
        let mut model = ReconModel::new(manifest.config)?;
        let loaded = ndgrad::io::load_params(dir)?;
        ndgrad::io::assign_params(&mut model.store, &loaded, dir)?;
        model.set_normalizer(manifest.normalizer)?;
        model.labels = manifest.labels;
        Ok(model)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct ModelManifest {
    config: ModelConfig,
    normalizer: ObsNormalizer,
    labels: BTreeMap<String, String>,
}
