//! Demonstration and play datasets: collection, persistence, batching.
//!
//! On disk a dataset is a directory holding `manifest.json` and one raw
//! `f32le` blob per column (`x.bin`, `y.bin`, `b.bin`, `u.bin`), row-major.
//! Play datasets carry only `y.bin` and `b.bin`.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::beacons::{BeaconConfig, BeaconReading};
use crate::blob::{self, DTYPE_TAG};
use crate::worlds::{self, EnvKind, Image, ObsKind, Observation, Vec2, WorldState, ROBOT_DIM};
use crate::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const DEFAULT_PLAY_SAMPLES: usize = 500;

/// Reset-seed derivation. Training streams live below bit 62; evaluation
/// streams have it set, so the two can never collide.
pub mod seeds {
    pub const EPISODE_BITS: u32 = 20;
    pub const MAX_BASE_SEED: u64 = 1 << 40;
    pub const EVAL_OFFSET: u64 = 1 << 62;
    const PLAY_FLAG: u64 = 1 << (EPISODE_BITS - 1);

    fn compose(seed: u64, index: usize, flag: u64) -> u64 {
        assert!(seed < MAX_BASE_SEED, "base seed {seed} exceeds 2^40");
        assert!((index as u64) < PLAY_FLAG, "episode index {index} exceeds 2^19");
        (seed << EPISODE_BITS) | flag | index as u64
    }

    pub fn demo(seed: u64, index: usize) -> u64 {
        compose(seed, index, 0)
    }

    pub fn play(seed: u64, index: usize) -> u64 {
        compose(seed, index, PLAY_FLAG)
    }

    pub fn eval(seed: u64, index: usize) -> u64 {
        EVAL_OFFSET | compose(seed, index, 0)
    }

    pub fn is_eval(seed: u64) -> bool {
        seed & EVAL_OFFSET != 0
    }
}

/// Beacon randomness for an episode runs on its own ChaCha stream, so
/// resets are identical across beacon configurations.
fn beacon_rng(episode_seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(episode_seed);
    rng.set_stream(1);
    rng
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemoManifest {
    pub env: EnvKind,
    pub n: usize,
    pub obs_kind: ObsKind,
    pub obs_shape: Vec<usize>,
    pub d: usize,
    pub horizon: usize,
    pub num_demos: usize,
    pub beacon: BeaconConfig,
    pub seed: u64,
    pub dtype: String,
}

impl DemoManifest {
    pub fn rows(&self) -> usize {
        self.num_demos * self.horizon
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlayManifest {
    pub env: EnvKind,
    pub n: usize,
    pub obs_kind: ObsKind,
    pub obs_shape: Vec<usize>,
    pub d: usize,
    pub num_samples: usize,
    pub beacon: BeaconConfig,
    pub seed: u64,
    pub dtype: String,
}

/// One recorded step `(x, y, b, u)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub x: Vec2,
    pub y: Observation,
    pub b: BeaconReading,
    pub u: Vec2,
}

/// Column-major storage of `demo_count * horizon` transitions.
#[derive(Clone, Debug, PartialEq)]
pub struct DemoDataset {
    pub manifest: DemoManifest,
    pub x: Vec<f32>,
    pub y: Vec<f32>,
    pub b: Vec<f32>,
    pub u: Vec<f32>,
}

/// Beacon-labelled observations without actions.
#[derive(Clone, Debug, PartialEq)]
pub struct PlayDataset {
    pub manifest: PlayManifest,
    pub y: Vec<f32>,
    pub b: Vec<f32>,
}

fn observation_from(kind: ObsKind, row: &[f32]) -> Observation {
    match kind {
        ObsKind::Vector => Observation::Vector(row.to_vec()),
        ObsKind::Image => Observation::Image(Image::from_data(row.to_vec())),
    }
}

/// Co-indexed rows gathered from a [`DemoDataset`].
#[derive(Clone, Debug, PartialEq)]
pub struct DemoBatch {
    pub rows: usize,
    pub x: Vec<f32>,
    pub y: Vec<f32>,
    pub b: Vec<f32>,
    pub u: Vec<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlayBatch {
    pub rows: usize,
    pub y: Vec<f32>,
    pub b: Vec<f32>,
}

fn gather(src: &[f32], width: usize, indices: &[usize]) -> Vec<f32> {
    let mut out = Vec::with_capacity(indices.len() * width);
    for &i in indices {
        out.extend_from_slice(&src[i * width..(i + 1) * width]);
    }
    out
}

impl DemoDataset {
    pub fn len(&self) -> usize {
        self.manifest.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn obs_len(&self) -> usize {
        self.manifest.obs_shape.iter().product()
    }

    pub fn transition(&self, i: usize) -> Transition {
        let (n, m, d) = (self.manifest.n, self.obs_len(), self.manifest.d);
        Transition {
            x: [self.x[i * n], self.x[i * n + 1]],
            y: observation_from(self.manifest.obs_kind, &self.y[i * m..(i + 1) * m]),
            b: BeaconReading(self.b[i * d..(i + 1) * d].to_vec()),
            u: [self.u[i * n], self.u[i * n + 1]],
        }
    }

    pub fn transitions(&self) -> impl Iterator<Item = Transition> + '_ {
        (0..self.len()).map(|i| self.transition(i))
    }

    pub fn gather(&self, indices: &[usize]) -> DemoBatch {
        let (n, m, d) = (self.manifest.n, self.obs_len(), self.manifest.d);
        DemoBatch {
            rows: indices.len(),
            x: gather(&self.x, n, indices),
            y: gather(&self.y, m, indices),
            b: gather(&self.b, d, indices),
            u: gather(&self.u, n, indices),
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        blob::ensure_dir(dir)?;
        blob::write_json(&dir.join(MANIFEST_FILE), &self.manifest)?;
        blob::write_f32(&dir.join("x.bin"), &self.x)?;
        blob::write_f32(&dir.join("y.bin"), &self.y)?;
        blob::write_f32(&dir.join("b.bin"), &self.b)?;
        blob::write_f32(&dir.join("u.bin"), &self.u)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let manifest: DemoManifest = blob::read_json(&path)?;
        check_header(&path, manifest.env, manifest.n, manifest.obs_kind, &manifest.obs_shape, manifest.d, &manifest.beacon, &manifest.dtype)?;
        let rows = manifest.rows();
        let m: usize = manifest.obs_shape.iter().product();
        Ok(DemoDataset {
            x: blob::read_f32(&dir.join("x.bin"), rows * manifest.n)?,
            y: blob::read_f32(&dir.join("y.bin"), rows * m)?,
            b: blob::read_f32(&dir.join("b.bin"), rows * manifest.d)?,
            u: blob::read_f32(&dir.join("u.bin"), rows * manifest.n)?,
            manifest,
        })
    }
}

impl PlayDataset {
    pub fn len(&self) -> usize {
        self.manifest.num_samples
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn obs_len(&self) -> usize {
        self.manifest.obs_shape.iter().product()
    }

    pub fn pair(&self, i: usize) -> (Observation, BeaconReading) {
        let (m, d) = (self.obs_len(), self.manifest.d);
        (
            observation_from(self.manifest.obs_kind, &self.y[i * m..(i + 1) * m]),
            BeaconReading(self.b[i * d..(i + 1) * d].to_vec()),
        )
    }

    pub fn gather(&self, indices: &[usize]) -> PlayBatch {
        PlayBatch {
            rows: indices.len(),
            y: gather(&self.y, self.obs_len(), indices),
            b: gather(&self.b, self.manifest.d, indices),
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        blob::ensure_dir(dir)?;
        blob::write_json(&dir.join(MANIFEST_FILE), &self.manifest)?;
        blob::write_f32(&dir.join("y.bin"), &self.y)?;
        blob::write_f32(&dir.join("b.bin"), &self.b)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let manifest: PlayManifest = blob::read_json(&path)?;
        check_header(&path, manifest.env, manifest.n, manifest.obs_kind, &manifest.obs_shape, manifest.d, &manifest.beacon, &manifest.dtype)?;
        let rows = manifest.num_samples;
        let m: usize = manifest.obs_shape.iter().product();
        Ok(PlayDataset {
            y: blob::read_f32(&dir.join("y.bin"), rows * m)?,
            b: blob::read_f32(&dir.join("b.bin"), rows * manifest.d)?,
            manifest,
        })
    }
}

#[allow(clippy::too_many_arguments)]
fn check_header(
    path: &Path,
    env: EnvKind,
    n: usize,
    obs_kind: ObsKind,
    obs_shape: &[usize],
    d: usize,
    beacon: &BeaconConfig,
    dtype: &str,
) -> Result<()> {
    let bad = |detail: String| {
        Err(Error::Manifest {
            path: path.to_path_buf(),
            detail,
        })
    };
    if dtype != DTYPE_TAG {
        return bad(format!("unsupported dtype {dtype:?}"));
    }
    if n != ROBOT_DIM {
        return bad(format!("robot dimension n = {n}, expected {ROBOT_DIM}"));
    }
    if obs_kind != env.obs_kind() || obs_shape != env.obs_shape() {
        return bad(format!(
            "observation {obs_kind:?} {obs_shape:?} does not match environment {env}"
        ));
    }
    if d != beacon.dim() {
        return bad(format!("d = {d} but the beacon config produces {}", beacon.dim()));
    }
    beacon.validate().or_else(|e| bad(e.to_string()))
}

fn push_obs(y: &mut Vec<f32>, state: &WorldState) {
    y.extend_from_slice(state.observe().as_slice());
}

/// Rolls out the expert for `num_demos` episodes of `horizon` steps,
/// recording `(x, y, b, u)` before each step.
pub fn collect_demos(
    env: EnvKind,
    beacon: &BeaconConfig,
    num_demos: usize,
    horizon: usize,
    seed: u64,
) -> Result<DemoDataset> {
    beacon.validate()?;
    if horizon == 0 {
        return Err(Error::contract("horizon must be positive"));
    }
    let rows = num_demos * horizon;
    let d = beacon.dim();
    let mut ds = DemoDataset {
        manifest: DemoManifest {
            env,
            n: ROBOT_DIM,
            obs_kind: env.obs_kind(),
            obs_shape: env.obs_shape(),
            d,
            horizon,
            num_demos,
            beacon: beacon.clone(),
            seed,
            dtype: DTYPE_TAG.to_string(),
        },
        x: Vec::with_capacity(rows * ROBOT_DIM),
        y: Vec::with_capacity(rows * env.obs_len()),
        b: Vec::with_capacity(rows * d),
        u: Vec::with_capacity(rows * ROBOT_DIM),
    };
    for demo in 0..num_demos {
        let episode_seed = seeds::demo(seed, demo);
        let mut state = worlds::reset(env, episode_seed);
        let mut rng = beacon_rng(episode_seed);
        let placed = beacon.place(&state, &mut rng);
        for _ in 0..horizon {
            let u = worlds::expert_action(&state);
            ds.x.extend_from_slice(&state.robot());
            push_obs(&mut ds.y, &state);
            ds.b.extend(placed.measure(&state, &mut rng)?.0);
            ds.u.extend_from_slice(&u);
            state = worlds::step(&state, u);
        }
    }
    Ok(ds)
}

/// Independent resets, one beacon-labelled observation each; no actions.
pub fn collect_play(
    env: EnvKind,
    beacon: &BeaconConfig,
    num_samples: usize,
    seed: u64,
) -> Result<PlayDataset> {
    beacon.validate()?;
    let d = beacon.dim();
    let mut y = Vec::with_capacity(num_samples * env.obs_len());
    let mut b = Vec::with_capacity(num_samples * d);
    for i in 0..num_samples {
        let episode_seed = seeds::play(seed, i);
        let state = worlds::reset(env, episode_seed);
        let mut rng = beacon_rng(episode_seed);
        let placed = beacon.place(&state, &mut rng);
        push_obs(&mut y, &state);
        b.extend(placed.measure(&state, &mut rng)?.0);
    }
    Ok(PlayDataset {
        manifest: PlayManifest {
            env,
            n: ROBOT_DIM,
            obs_kind: env.obs_kind(),
            obs_shape: env.obs_shape(),
            d,
            num_samples,
            beacon: beacon.clone(),
            seed,
            dtype: DTYPE_TAG.to_string(),
        },
        y,
        b,
    })
}

/// Minibatches drawn without replacement; each epoch is a fresh permutation.
/// The last batch of an epoch may be short.
#[derive(Clone, Debug)]
pub struct BatchSampler {
    batch_size: usize,
    order: Vec<usize>,
    cursor: usize,
}

impl BatchSampler {
    pub fn new(len: usize, batch_size: usize) -> Result<Self> {
        if batch_size == 0 || batch_size > len {
            return Err(Error::contract(format!(
                "batch size {batch_size} must be in 1..={len} (dataset size)"
            )));
        }
        Ok(BatchSampler {
            batch_size,
            order: (0..len).collect(),
            cursor: 0,
        })
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.order.len().div_ceil(self.batch_size)
    }

    pub fn next_batch<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Vec<usize> {
        if self.cursor == 0 {
            self.order.sort_unstable();
            self.order.shuffle(rng);
        }
        let end = (self.cursor + self.batch_size).min(self.order.len());
        let batch = self.order[self.cursor..end].to_vec();
        self.cursor = if end == self.order.len() { 0 } else { end };
        batch
    }
}
