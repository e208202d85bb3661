use std::fmt::Write as _;
use std::panic::{self, AssertUnwindSafe};

use serde::{Deserialize, Serialize};

use super::eval::{self, Summary};
use super::train::{train, Method, TrainConfig};
use crate::beacons::{measure_calls, Axis, BeaconConfig, BeaconMode, Placement};
use crate::datasets::{collect_demos, collect_play, DEFAULT_PLAY_SAMPLES};
use crate::model::{ModelConfig, ReconModel};
use crate::worlds::{EnvKind, DEFAULT_HORIZON};
use crate::{Error, Result};

pub const CSV_HEADER: &str = "run_id,env,method,play,placement,sigma,num_demos,rep_seed,metric,value,status";

/// One point of the sweep grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    pub method: Method,
    pub play: bool,
    /// Ignored by the baseline.
    pub placement: Placement,
    pub sigma: f32,
    pub num_demos: usize,
}

impl CellSpec {
    pub fn baseline(num_demos: usize) -> Self {
        CellSpec {
            method: Method::Baseline,
            play: false,
            placement: Placement::Exact,
            sigma: 0.0,
            num_demos,
        }
    }

    pub fn recon(method: Method, play: bool, placement: Placement, sigma: f32, num_demos: usize) -> Self {
        CellSpec { method, play, placement, sigma, num_demos }
    }

    /// Short human-readable label, e.g. `recon-p play` or `exact s=2.5`.
    pub fn label(&self) -> String {
        if self.method == Method::Baseline {
            return "baseline".into();
        }
        let mut s = format!("{} {}", self.method, self.placement.name());
        if self.play {
            s.push_str(" +play");
        }
        if self.sigma > 0.0 {
            let _ = write!(s, " s={}", self.sigma);
        }
        s
    }

    fn placement_field(&self) -> &'static str {
        match self.method {
            Method::Baseline => "none",
            _ => self.placement.name(),
        }
    }

    fn sigma_field(&self) -> f32 {
        match self.method {
            Method::Baseline => 0.0,
            _ => self.sigma,
        }
    }

    /// Beacon configuration used to label the cell's data. The baseline
    /// still collects with a default config; its readings are never used.
    pub fn beacon(&self, axis: Axis) -> BeaconConfig {
        let mode = self.method.beacon_mode().unwrap_or(BeaconMode::Position);
        let placement = match self.method {
            Method::Baseline => Placement::Exact,
            _ => self.placement,
        };
        BeaconConfig::new(mode, placement)
            .with_sigma(self.sigma_field())
            .with_axis(axis)
    }

    fn validate(&self) -> Result<()> {
        if self.method == Method::Baseline && self.play {
            return Err(Error::contract("the baseline cannot use play data"));
        }
        if self.num_demos == 0 {
            return Err(Error::contract("num_demos must be positive"));
        }
        self.beacon(Axis::X).validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainBudget {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f32,
    pub lambda: f32,
}

impl TrainBudget {
    pub fn for_env(env: EnvKind) -> Self {
        match env {
            EnvKind::Static2d => TrainBudget { epochs: 2000, batch_size: 10, lr: 1e-4, lambda: 1.0 },
            EnvKind::Dynamic2d => TrainBudget { epochs: 1000, batch_size: 10, lr: 1e-4, lambda: 1.0 },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub env: EnvKind,
    pub cells: Vec<CellSpec>,
    pub reps: usize,
    /// Repetition `r` uses `base_seed + r` for data, initialization,
    /// minibatch order and its held-out test set.
    pub base_seed: u64,
    pub horizon: usize,
    pub eval_configs: usize,
    pub play_samples: usize,
    pub axis: Axis,
    /// Overrides the environment's default feature width.
    pub k: Option<usize>,
    pub budget: TrainBudget,
}

impl ExperimentSpec {
    pub fn new(name: impl Into<String>, env: EnvKind) -> Self {
        ExperimentSpec {
            name: name.into(),
            env,
            cells: Vec::new(),
            reps: 1,
            base_seed: 0,
            horizon: DEFAULT_HORIZON,
            eval_configs: 100,
            play_samples: DEFAULT_PLAY_SAMPLES,
            axis: Axis::X,
            k: None,
            budget: TrainBudget::for_env(env),
        }
    }

    pub fn rep_seed(&self, rep: usize) -> u64 {
        self.base_seed + rep as u64
    }
}

/// Outcome of one (cell, repetition) run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub cell: usize,
    pub rep: usize,
    pub rep_seed: u64,
    /// Mean evaluation metric over the held-out configurations.
    pub value: Option<f64>,
    /// `ok` or an error description.
    pub status: String,
    pub first_loss: Option<f32>,
    pub final_loss: Option<f32>,
    /// Beacon measurements taken while evaluating; zero by construction.
    pub eval_beacon_calls: u64,
}

impl RunRecord {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    pub fn loss_decreased(&self) -> bool {
        matches!((self.first_loss, self.final_loss), (Some(a), Some(b)) if b < a)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResults {
    pub spec: ExperimentSpec,
    pub runs: Vec<RunRecord>,
}

fn run_one(spec: &ExperimentSpec, cell: &CellSpec, rep_seed: u64) -> Result<(f64, f32, f32, u64)> {
    cell.validate()?;
    let beacon = cell.beacon(spec.axis);
    let demos = collect_demos(spec.env, &beacon, cell.num_demos, spec.horizon, rep_seed)?;
    let play = if cell.play {
        Some(collect_play(spec.env, &beacon, spec.play_samples, rep_seed)?)
    } else {
        None
    };
    let mut mc = ModelConfig::new(cell.method.model_mode(), spec.env, beacon.dim()).with_seed(rep_seed);
    if let Some(k) = spec.k {
        mc = mc.with_k(k);
    }
    let mut model = ReconModel::new(mc)?;
    let tc = TrainConfig {
        method: cell.method,
        play: cell.play,
        epochs: spec.budget.epochs,
        batch_size: spec.budget.batch_size.min(demos.len()),
        lr: spec.budget.lr,
        lambda: spec.budget.lambda,
        seed: rep_seed,
    };
    let report = train(&mut model, &demos, play.as_ref(), &tc)?;
    let before = measure_calls();
    let eval = eval::eval_final_distance(&model, spec.env, spec.eval_configs, spec.horizon, rep_seed);
    let calls = measure_calls() - before;
    Ok((
        eval.summary.mean,
        report.first_loss().unwrap_or(f32::NAN),
        report.final_loss().unwrap_or(f32::NAN),
        calls,
    ))
}

fn panic_message(payload: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        s.to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "panic".into()
    }
}

/// Runs every cell for every repetition. Failures are recorded in the run's
/// status and the sweep continues.
pub fn run_experiment(spec: &ExperimentSpec) -> ExperimentResults {
    run_experiment_with(spec, |_, _| {})
}

/// As [`run_experiment`], calling `on_run` after each run completes.
pub fn run_experiment_with<F>(spec: &ExperimentSpec, mut on_run: F) -> ExperimentResults
where
    F: FnMut(&CellSpec, &RunRecord),
{
    let mut runs = Vec::with_capacity(spec.cells.len() * spec.reps);
    for (ci, cell) in spec.cells.iter().enumerate() {
        for rep in 0..spec.reps {
            let rep_seed = spec.rep_seed(rep);
            let outcome = panic::catch_unwind(AssertUnwindSafe(|| run_one(spec, cell, rep_seed)));
            let record = match outcome {
                Ok(Ok((value, first, last, calls))) => RunRecord {
                    cell: ci,
                    rep,
                    rep_seed,
                    value: Some(value),
                    status: "ok".into(),
                    first_loss: Some(first),
                    final_loss: Some(last),
                    eval_beacon_calls: calls,
                },
                failed => {
                    let msg = match failed {
                        Ok(Err(e)) => e.to_string(),
                        Err(p) => panic_message(p),
                        Ok(Ok(_)) => unreachable!(),
                    };
                    RunRecord {
                        cell: ci,
                        rep,
                        rep_seed,
                        value: None,
                        status: format!("error: {msg}"),
                        first_loss: None,
                        final_loss: None,
                        eval_beacon_calls: 0,
                    }
                }
            };
            on_run(cell, &record);
            runs.push(record);
        }
    }
    ExperimentResults { spec: spec.clone(), runs }
}

fn csv_field(s: &str) -> String {
    s.replace([',', '\n', '\r'], ";")
}

fn fmt_value(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v}"),
        None => "NaN".into(),
    }
}

impl ExperimentResults {
    pub fn metric(&self) -> &'static str {
        eval::metric_name(self.spec.env)
    }

    pub fn cell_runs(&self, cell: usize) -> impl Iterator<Item = &RunRecord> {
        self.runs.iter().filter(move |r| r.cell == cell)
    }

    /// Successful per-repetition values of a cell, in repetition order.
    pub fn cell_values(&self, cell: usize) -> Vec<f64> {
        self.cell_runs(cell).filter_map(|r| r.value).collect()
    }

    pub fn cell_summary(&self, cell: usize) -> Summary {
        Summary::of(&self.cell_values(cell))
    }

    /// Index of the first cell matching `pred`.
    pub fn find_cell(&self, pred: impl Fn(&CellSpec) -> bool) -> Option<usize> {
        self.spec.cells.iter().position(pred)
    }

    /// Per-repetition values for `cell`, `None` where the run failed.
    pub fn paired_values(&self, cell: usize) -> Vec<Option<f64>> {
        let mut out = vec![None; self.spec.reps];
        for r in self.cell_runs(cell) {
            out[r.rep] = r.value;
        }
        out
    }

    pub fn total_eval_beacon_calls(&self) -> u64 {
        self.runs.iter().map(|r| r.eval_beacon_calls).sum()
    }

    /// One row per run followed by `<metric>_mean` / `<metric>_std` rows per cell.
    pub fn to_csv(&self) -> String {
        let spec = &self.spec;
        let metric = self.metric();
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        let row = |out: &mut String, run_id: &str, cell: &CellSpec, rep_seed: &str, metric: &str, value: String, status: &str| {
            let _ = writeln!(
                out,
                "{run_id},{},{},{},{},{},{},{rep_seed},{metric},{value},{}",
                spec.env,
                cell.method,
                if cell.play { "play" } else { "noplay" },
                cell.placement_field(),
                cell.sigma_field(),
                cell.num_demos,
                csv_field(status)
            );
        };
        for r in &self.runs {
            let cell = &spec.cells[r.cell];
            let run_id = format!("{}-c{:02}-r{:02}", spec.name, r.cell, r.rep);
            row(&mut out, &run_id, cell, &r.rep_seed.to_string(), metric, fmt_value(r.value), &r.status);
        }
        for (ci, cell) in spec.cells.iter().enumerate() {
            let total = self.cell_runs(ci).count();
            if total == 0 {
                continue;
            }
            let ok = self.cell_runs(ci).filter(|r| r.is_ok()).count();
            let status = if ok == total { "ok".to_string() } else { format!("partial {ok}/{total}") };
            let s = self.cell_summary(ci);
            let run_id = format!("{}-c{:02}-agg", spec.name, ci);
            let value = |v: f64| if ok == 0 { fmt_value(None) } else { fmt_value(Some(v)) };
            row(&mut out, &run_id, cell, "all", &format!("{metric}_mean"), value(s.mean), &status);
            row(&mut out, &run_id, cell, "all", &format!("{metric}_std"), value(s.std), &status);
        }
        out
    }

    /// Aggregate bars for the given cells.
    pub fn bars(&self, cells: &[usize]) -> Vec<super::chart::Bar> {
        cells
            .iter()
            .map(|&c| {
                let s = self.cell_summary(c);
                super::chart::Bar {
                    label: self.spec.cells[c].label(),
                    mean: s.mean,
                    std: s.std,
                }
            })
            .collect()
    }
}
