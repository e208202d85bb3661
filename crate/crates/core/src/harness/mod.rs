//! Training, closed-loop evaluation and experiment sweeps.

pub mod chart;
mod eval;
mod experiment;
pub mod figures;
mod train;

pub use eval::{
    eval_action_mse, eval_final_distance, higher_is_better, metric_name, rollout, EvalConfig,
    EvalReport, Expert, FnPolicy, Policy, Summary, Trajectory, ZeroPolicy,
};
pub use experiment::{
    run_experiment, run_experiment_with, CellSpec, ExperimentResults, ExperimentSpec, RunRecord,
    TrainBudget, CSV_HEADER,
};
pub use train::{train, EpochLoss, Method, TrainConfig, TrainReport, DEFAULT_LR};
