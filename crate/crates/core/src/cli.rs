//! Command-line front end: dataset generation, training, evaluation,
//! figure reproduction and plotting.
//!
//! Every subcommand accepts `--config <file.json>` whose keys mirror the
//! long flag names (with `_` for `-`). Flags given on the command line win
//! over the file. The merged settings are printed to stderr and written as
//! `effective_config.json` into every output directory.

use std::ffi::OsString;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::beacons::{Axis, BeaconConfig, BeaconMode, Placement};
use crate::blob;
use crate::datasets::{collect_demos, collect_play, seeds, DemoDataset, PlayDataset};
use crate::harness::chart::{bar_chart_svg, Bar};
use crate::harness::figures::Figure;
use crate::harness::{
    eval_action_mse, eval_final_distance, run_experiment_with, train, CellSpec, Method,
    TrainConfig, CSV_HEADER,
};
use crate::model::{ModelConfig, ReconModel};
use crate::worlds::EnvKind;

pub const EFFECTIVE_CONFIG: &str = "effective_config.json";

#[derive(Debug, Parser)]
#[command(name = "recon", version, about = "Beacon-supervised imitation learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Record datasets.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Train a policy on recorded demonstrations.
    Train(TrainArgs),
    /// Roll a trained policy out on held-out configurations.
    Eval(EvalArgs),
    /// Run a full figure sweep and check its acceptance criteria.
    Reproduce(ReproduceArgs),
    /// Draw a bar chart from a results CSV.
    Plot(PlotArgs),
}

#[derive(Debug, Subcommand)]
enum GenCommand {
    /// Expert demonstrations with beacon readings.
    Demos(GenDemosArgs),
    /// Single-frame play data: observations with beacon readings, no actions.
    Play(GenPlayArgs),
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
struct BeaconArgs {
    /// position | distance
    #[arg(long)]
    beacon: Option<String>,
    /// exact | partial | other | random
    #[arg(long)]
    placement: Option<String>,
    /// Axis read by partial beacons: x | y
    #[arg(long)]
    axis: Option<String>,
    /// Standard deviation of the Gaussian reading noise.
    #[arg(long)]
    sigma: Option<f32>,
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
struct GenDemosArgs {
    /// static2d | dynamic2d
    #[arg(long)]
    env: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    beacon: BeaconArgs,
    #[arg(long)]
    num_demos: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output dataset directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
struct GenPlayArgs {
    #[arg(long)]
    env: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    beacon: BeaconArgs,
    #[arg(long)]
    num_samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
struct TrainArgs {
    /// Demonstration dataset directory.
    #[arg(long)]
    demos: Option<PathBuf>,
    /// Play dataset directory (RECON methods only).
    #[arg(long)]
    play: Option<PathBuf>,
    /// baseline | recon-p | recon-d
    #[arg(long)]
    method: Option<String>,
    /// Feature width.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Weight of the beacon terms.
    #[arg(long)]
    lambda: Option<f32>,
    #[arg(long)]
    seed: Option<u64>,
    /// Checkpoint directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
struct EvalArgs {
    /// Checkpoint directory written by `train`.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Defaults to the environment the model was trained on.
    #[arg(long)]
    env: Option<String>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// task (final distance or reward) | action-mse
    #[arg(long)]
    metric: Option<String>,
    /// CSV report path; without it the CSV goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
struct ReproduceArgs {
    /// fig3 | fig4
    figure: Option<String>,
    #[arg(long)]
    reps: Option<usize>,
    /// Tiny training and evaluation budget for a quick end-to-end check.
    #[arg(long)]
    #[serde(default)]
    smoke: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default `results/<figure>`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
struct PlotArgs {
    /// Results CSV written by `reproduce`.
    #[arg(long)]
    results: Option<PathBuf>,
    /// SVG output path.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    title: Option<String>,
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Runtime(String),
    Acceptance(usize),
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code: 0 on success, 2 for usage errors, 1 for
/// runtime errors and failed acceptance checks.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(CliError::Acceptance(failed)) => {
            eprintln!("error: {failed} acceptance criteria failed");
            1
        }
    }
}

fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Gen(GenCommand::Demos(a)) => gen_demos(a),
        Command::Gen(GenCommand::Play(a)) => gen_play(a),
        Command::Train(a) => train_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Reproduce(a) => reproduce(a),
        Command::Plot(a) => plot(a),
    }
}

/// Overlays the flags onto the config file; unset flags (and `false`
/// switches) leave the file's value in place.
fn merge<T: Serialize + DeserializeOwned + Default>(flags: T, config: Option<&Path>) -> CliResult<T> {
    let Some(path) = config else {
        return Ok(flags);
    };
    let text = fs::read_to_string(path)
        .map_err(|e| usage(format!("--config {}: {e}", path.display())))?;
    let mut base: Value = serde_json::from_str(&text)
        .map_err(|e| usage(format!("--config {}: {e}", path.display())))?;
    let Some(obj) = base.as_object_mut() else {
        return Err(usage(format!("--config {}: expected a JSON object", path.display())));
    };
    let known = serde_json::to_value(T::default()).map_err(|e| CliError::Runtime(e.to_string()))?;
    if let Some(key) = obj.keys().find(|k| known.get(k.as_str()).is_none()) {
        return Err(usage(format!("--config {}: unknown key {key:?}", path.display())));
    }
    let over = serde_json::to_value(&flags).map_err(|e| CliError::Runtime(e.to_string()))?;
    if let Value::Object(over) = over {
        for (k, v) in over {
            if !matches!(v, Value::Null | Value::Bool(false)) {
                obj.insert(k, v);
            }
        }
    }
    serde_json::from_value(base).map_err(|e| usage(format!("--config {}: {e}", path.display())))
}

fn required<T: Clone>(value: &Option<T>, flag: &str) -> CliResult<T> {
    value.clone().ok_or_else(|| usage(format!("{flag} is required")))
}

fn parse<T: FromStr>(flag: &str, s: &str) -> CliResult<T>
where
    T::Err: Display,
{
    s.parse().map_err(|e| usage(format!("{flag}: {e}")))
}

fn echo_config<T: Serialize>(command: &str, args: &T, dir: Option<&Path>) -> CliResult<()> {
    let mut value = serde_json::to_value(args).map_err(|e| CliError::Runtime(e.to_string()))?;
    if let Value::Object(obj) = &mut value {
        obj.insert("command".into(), Value::String(command.into()));
    }
    eprintln!("effective config: {value}");
    if let Some(dir) = dir {
        blob::ensure_dir(dir)?;
        blob::write_json(&dir.join(EFFECTIVE_CONFIG), &value)?;
    }
    Ok(())
}

fn check_seed(seed: u64) -> CliResult<()> {
    if seed >= seeds::MAX_BASE_SEED {
        return Err(usage(format!("--seed must be below 2^40, got {seed}")));
    }
    Ok(())
}

fn resolve_beacon(a: &mut BeaconArgs) -> CliResult<BeaconConfig> {
    let mode: BeaconMode = parse("--beacon", a.beacon.get_or_insert_with(|| "position".into()))?;
    let placement: Placement =
        parse("--placement", a.placement.get_or_insert_with(|| "exact".into()))?;
    let axis: Axis = parse("--axis", a.axis.get_or_insert_with(|| "x".into()))?;
    let sigma = *a.sigma.get_or_insert(0.0);
    if mode == BeaconMode::Distance && placement != Placement::Exact {
        return Err(usage(format!(
            "--beacon distance cannot be combined with --placement {placement}; distance readings need --placement exact"
        )));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(usage(format!("--sigma must be finite and non-negative, got {sigma}")));
    }
    Ok(BeaconConfig::new(mode, placement).with_axis(axis).with_sigma(sigma))
}

fn gen_demos(a: GenDemosArgs) -> CliResult<()> {
    let config = a.config.clone();
    let mut a = merge(a, config.as_deref())?;
    let env: EnvKind = parse("--env", &required(&a.env, "--env")?)?;
    let beacon = resolve_beacon(&mut a.beacon)?;
    let num_demos = *a.num_demos.get_or_insert(10);
    let horizon = *a.horizon.get_or_insert(crate::worlds::DEFAULT_HORIZON);
    let seed = *a.seed.get_or_insert(0);
    let out = required(&a.out, "--out")?;
    if num_demos == 0 {
        return Err(usage("--num-demos must be positive"));
    }
    if horizon == 0 {
        return Err(usage("--horizon must be positive"));
    }
    check_seed(seed)?;
    echo_config("gen demos", &a, Some(&out))?;
    let ds = collect_demos(env, &beacon, num_demos, horizon, seed)?;
    ds.save(&out)?;
    println!(
        "wrote {} transitions ({} demos x {} steps, d = {}) to {}",
        ds.len(),
        num_demos,
        horizon,
        ds.manifest.d,
        out.display()
    );
    Ok(())
}

fn gen_play(a: GenPlayArgs) -> CliResult<()> {
    let config = a.config.clone();
    let mut a = merge(a, config.as_deref())?;
    let env: EnvKind = parse("--env", &required(&a.env, "--env")?)?;
    let beacon = resolve_beacon(&mut a.beacon)?;
    let num_samples = *a.num_samples.get_or_insert(crate::datasets::DEFAULT_PLAY_SAMPLES);
    let seed = *a.seed.get_or_insert(0);
    let out = required(&a.out, "--out")?;
    if num_samples == 0 {
        return Err(usage("--num-samples must be positive"));
    }
    check_seed(seed)?;
    echo_config("gen play", &a, Some(&out))?;
    let ds = collect_play(env, &beacon, num_samples, seed)?;
    ds.save(&out)?;
    println!("wrote {} play samples (d = {}) to {}", ds.len(), ds.manifest.d, out.display());
    Ok(())
}

fn train_cmd(a: TrainArgs) -> CliResult<()> {
    let config = a.config.clone();
    let mut a = merge(a, config.as_deref())?;
    let demos_dir = required(&a.demos, "--demos")?;
    let method: Method = parse("--method", &required(&a.method, "--method")?)?;
    if method == Method::Baseline && a.play.is_some() {
        return Err(usage("--method baseline cannot be combined with --play; only RECON methods use play data"));
    }
    let defaults = TrainConfig::new(method);
    let tc = TrainConfig {
        method,
        play: a.play.is_some(),
        epochs: *a.epochs.get_or_insert(defaults.epochs),
        batch_size: *a.batch_size.get_or_insert(defaults.batch_size),
        lr: *a.lr.get_or_insert_with(|| defaults.lr.to_string().parse().unwrap_or(1e-4)) as f32,
        lambda: *a.lambda.get_or_insert(defaults.lambda),
        seed: *a.seed.get_or_insert(defaults.seed),
    };
    let out = required(&a.out, "--out")?;
    if tc.epochs == 0 || tc.batch_size == 0 {
        return Err(usage("--epochs and --batch-size must be positive"));
    }
    if !(tc.lr > 0.0 && tc.lr.is_finite()) {
        return Err(usage(format!("--lr must be positive, got {}", tc.lr)));
    }
    if !(tc.lambda >= 0.0 && tc.lambda.is_finite()) {
        return Err(usage(format!("--lambda must be non-negative, got {}", tc.lambda)));
    }
    if a.k == Some(0) {
        return Err(usage("--k must be positive"));
    }

    let demos = DemoDataset::load(&demos_dir)?;
    let play = a.play.as_deref().map(PlayDataset::load).transpose()?;
    let dm = &demos.manifest;
    let mut mc = ModelConfig::new(method.model_mode(), dm.env, dm.d)
        .with_seed(tc.seed)
        .with_lambda(tc.lambda);
    if let Some(k) = a.k {
        mc = mc.with_k(k);
    }
    a.k = Some(mc.k);
    let mut model = ReconModel::new(mc)?;
    echo_config("train", &a, Some(&out))?;
    let report = train(&mut model, &demos, play.as_ref(), &tc)?;
    model.labels.insert("method".into(), method.to_string());
    model.labels.insert("demos".into(), demos_dir.display().to_string());
    model.save(&out)?;
    fs::write(out.join("trace.csv"), report.trace_csv())
        .map_err(|e| crate::Error::io(out.join("trace.csv"), e))?;
    blob::write_json(&out.join("train_report.json"), &report)?;
    println!(
        "trained {method} for {} epochs ({} steps, lr {}): loss {} -> {}; checkpoint in {}",
        report.epochs,
        report.steps,
        report.lr,
        report.first_loss().unwrap_or(f32::NAN),
        report.final_loss().unwrap_or(f32::NAN),
        out.display()
    );
    Ok(())
}

fn eval_cmd(a: EvalArgs) -> CliResult<()> {
    let config = a.config.clone();
    let mut a = merge(a, config.as_deref())?;
    let model_dir = required(&a.model, "--model")?;
    let env = a.env.as_deref().map(|s| parse::<EnvKind>("--env", s)).transpose()?;
    let episodes = *a.episodes.get_or_insert(100);
    let horizon = *a.horizon.get_or_insert(crate::worlds::DEFAULT_HORIZON);
    let seed = *a.seed.get_or_insert(0);
    let metric = a.metric.get_or_insert_with(|| "task".into()).clone();
    if !matches!(metric.as_str(), "task" | "action-mse") {
        return Err(usage(format!("--metric must be task or action-mse, got {metric:?}")));
    }
    if episodes == 0 || horizon == 0 {
        return Err(usage("--episodes and --horizon must be positive"));
    }
    check_seed(seed)?;

    let model = ReconModel::load(&model_dir)?;
    let trained_on = model.config().env;
    let env = env.unwrap_or(trained_on);
    if env != trained_on {
        return Err(CliError::Runtime(format!(
            "--env {env} does not match the model, which was trained on {trained_on}"
        )));
    }
    a.env = Some(env.to_string());
    echo_config("eval", &a, None)?;
    let before = crate::beacons::measure_calls();
    let csv = if metric == "action-mse" {
        let mse = eval_action_mse(&model, env, episodes, horizon, seed);
        println!("action_mse {mse:.6} over {episodes} expert-driven episodes");
        format!("episode,eval_seed,metric,value\nall,{seed},action_mse,{mse}\n")
    } else {
        let report = eval_final_distance(&model, env, episodes, horizon, seed);
        let s = report.summary;
        println!(
            "{}: mean {:.4} std {:.4} median {:.4} over {episodes} episodes",
            report.metric_name(),
            s.mean,
            s.std,
            s.median
        );
        report.to_csv()
    };
    let calls = crate::beacons::measure_calls() - before;
    if calls != 0 {
        return Err(CliError::Runtime(format!("evaluation took {calls} beacon measurements")));
    }
    match &a.out {
        Some(path) => fs::write(path, csv).map_err(|e| crate::Error::io(path, e))?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn reproduce(a: ReproduceArgs) -> CliResult<()> {
    let config = a.config.clone();
    let mut a = merge(a, config.as_deref())?;
    let figure: Figure = parse("figure", &required(&a.figure, "the figure argument (fig3 or fig4)")?)?;
    let reps = *a.reps.get_or_insert(figure.default_reps());
    let seed = *a.seed.get_or_insert(0);
    if reps == 0 {
        return Err(usage("--reps must be positive"));
    }
    check_seed(seed)?;
    let out = a
        .out
        .get_or_insert_with(|| Path::new("results").join(figure.name()))
        .clone();
    echo_config("reproduce", &a, Some(&out))?;

    let spec = figure.spec(reps, seed, a.smoke);
    blob::write_json(&out.join("spec.json"), &spec)?;
    let total = spec.cells.len() * spec.reps;
    let mut done = 0;
    let results = run_experiment_with(&spec, |cell, run| {
        done += 1;
        let value = run.value.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into());
        eprintln!("[{done}/{total}] {} rep {}: {value} ({})", cell.label(), run.rep, run.status);
    });

    let csv_path = out.join("results.csv");
    fs::write(&csv_path, results.to_csv()).map_err(|e| crate::Error::io(&csv_path, e))?;
    for (stem, svg) in figure.charts(&results) {
        let path = out.join(format!("{stem}.svg"));
        fs::write(&path, svg).map_err(|e| crate::Error::io(&path, e))?;
    }
    for (i, cell) in spec.cells.iter().enumerate() {
        let s = results.cell_summary(i);
        println!("{:<28} mean {:.4} std {:.4} median {:.4}", cell.label(), s.mean, s.std, s.median);
    }
    let checks = figure.check(&results);
    let mut lines = String::new();
    for c in &checks {
        println!("{}", c.line());
        lines.push_str(&c.line());
        lines.push('\n');
    }
    let path = out.join("acceptance.txt");
    fs::write(&path, lines).map_err(|e| crate::Error::io(&path, e))?;
    println!("results in {}", out.display());

    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed > 0 && !a.smoke {
        return Err(CliError::Acceptance(failed));
    }
    if failed > 0 {
        eprintln!("note: smoke budget; criteria are informational");
    }
    Ok(())
}

fn plot(a: PlotArgs) -> CliResult<()> {
    let config = a.config.clone();
    let mut a = merge(a, config.as_deref())?;
    let results = required(&a.results, "--results")?;
    let out = required(&a.out, "--out")?;
    let text = fs::read_to_string(&results).map_err(|e| crate::Error::io(&results, e))?;
    let (metric, bars) = aggregate_bars(&text)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", results.display())))?;
    let title = a.title.get_or_insert_with(|| format!("{metric} by configuration")).clone();
    echo_config("plot", &a, None)?;
    fs::write(&out, bar_chart_svg(&title, &metric, &bars)).map_err(|e| crate::Error::io(&out, e))?;
    println!("wrote {} bars to {}", bars.len(), out.display());
    Ok(())
}

/// Bars from the `<metric>_mean` / `<metric>_std` aggregate rows of a
/// results CSV, in file order.
fn aggregate_bars(csv: &str) -> std::result::Result<(String, Vec<Bar>), String> {
    let mut lines = csv.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err("not a results CSV (unexpected header)".into());
    }
    let mut metric = String::new();
    let mut bars: Vec<(String, Bar)> = Vec::new();
    for (n, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 11 {
            return Err(format!("line {}: expected 11 fields, got {}", n + 2, f.len()));
        }
        if f[7] != "all" {
            continue;
        }
        let value: f64 = f[9].parse().map_err(|_| format!("line {}: bad value {:?}", n + 2, f[9]))?;
        let method: Method = f[2].parse().map_err(|e| format!("line {}: {e}", n + 2))?;
        let cell = if method == Method::Baseline {
            CellSpec::baseline(0)
        } else {
            let placement: Placement = f[4].parse().map_err(|e| format!("line {}: {e}", n + 2))?;
            let sigma: f32 = f[5].parse().map_err(|_| format!("line {}: bad sigma", n + 2))?;
            CellSpec::recon(method, f[3] == "play", placement, sigma, 0)
        };
        let idx = match bars.iter().position(|(id, _)| id == f[0]) {
            Some(i) => i,
            None => {
                bars.push((f[0].to_string(), Bar { label: cell.label(), mean: f64::NAN, std: f64::NAN }));
                bars.len() - 1
            }
        };
        if let Some(m) = f[8].strip_suffix("_mean") {
            metric = m.to_string();
            bars[idx].1.mean = value;
        } else if f[8].ends_with("_std") {
            bars[idx].1.std = value;
        }
    }
    if bars.is_empty() {
        return Err("no aggregate rows".into());
    }
    Ok((metric, bars.into_iter().map(|(_, b)| b).collect()))
}
