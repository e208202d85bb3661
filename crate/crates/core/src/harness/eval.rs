use serde::{Deserialize, Serialize};

use crate::datasets::seeds;
use crate::model::ReconModel;
use crate::worlds::{self, geom, EnvKind, Observation, Vec2, WorldState};

/// Anything that maps the robot's view of the world to a velocity command.
/// Policies see the world state only through `state.robot()` and the
/// observation unless they are scripted oracles.
pub trait Policy {
    fn act(&self, state: &WorldState, obs: &Observation) -> Vec2;
}

impl Policy for ReconModel {
    fn act(&self, state: &WorldState, obs: &Observation) -> Vec2 {
        ReconModel::act(self, state.robot(), obs)
            .expect("model dimensions do not match the environment")
    }
}

/// The scripted demonstrator.
#[derive(Clone, Copy, Debug, Default)]
pub struct Expert;

impl Policy for Expert {
    fn act(&self, state: &WorldState, _obs: &Observation) -> Vec2 {
        worlds::expert_action(state)
    }
}

/// Always commands zero velocity.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroPolicy;

impl Policy for ZeroPolicy {
    fn act(&self, _state: &WorldState, _obs: &Observation) -> Vec2 {
        [0.0, 0.0]
    }
}

impl<P: Policy + ?Sized> Policy for &P {
    fn act(&self, state: &WorldState, obs: &Observation) -> Vec2 {
        (**self).act(state, obs)
    }
}

/// Adapts a closure into a [`Policy`].
pub struct FnPolicy<F>(pub F);

impl<F: Fn(&WorldState, &Observation) -> Vec2> Policy for FnPolicy<F> {
    fn act(&self, state: &WorldState, obs: &Observation) -> Vec2 {
        (self.0)(state, obs)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    /// `horizon + 1` states, starting with the reset state.
    pub states: Vec<WorldState>,
    pub actions: Vec<Vec2>,
}

impl Trajectory {
    pub fn final_state(&self) -> &WorldState {
        self.states.last().expect("a trajectory always holds its reset state")
    }
}

/// Closed-loop rollout from `reset(env, seed)`.
pub fn rollout<P: Policy + ?Sized>(policy: &P, env: EnvKind, seed: u64, horizon: usize) -> Trajectory {
    let mut state = worlds::reset(env, seed);
    let mut states = Vec::with_capacity(horizon + 1);
    let mut actions = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let obs = state.observe();
        let u = policy.act(&state, &obs);
        let next = worlds::step(&state, u);
        states.push(state);
        actions.push(u);
        state = next;
    }
    states.push(state);
    Trajectory { states, actions }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation (`n - 1` denominator); zero for one value.
    pub std: f64,
    pub median: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let n = values.len();
        if n == 0 {
            return Summary { mean: f64::NAN, std: f64::NAN, median: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        };
        Summary { mean, std, median }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub env: EnvKind,
    pub num_configs: usize,
    pub horizon: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: EvalConfig,
    /// Robot to task-object distance after the last step, one per configuration.
    pub final_distance: Vec<f64>,
    pub summary: Summary,
    pub action_mse: Option<f64>,
}

impl EvalReport {
    /// `final_distance` for the static world, `reward` for the dynamic one.
    pub fn metric_name(&self) -> &'static str {
        metric_name(self.config.env)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("episode,eval_seed,metric,value\n");
        for (i, v) in self.final_distance.iter().enumerate() {
            out.push_str(&format!(
                "{i},{},{},{v}\n",
                seeds::eval(self.config.seed, i),
                self.metric_name()
            ));
        }
        out
    }
}

pub fn metric_name(env: EnvKind) -> &'static str {
    match env {
        EnvKind::Static2d => "final_distance",
        EnvKind::Dynamic2d => "reward",
    }
}

/// True when a larger metric value is better.
pub fn higher_is_better(env: EnvKind) -> bool {
    env == EnvKind::Dynamic2d
}

/// Rolls `policy` out on `num_configs` held-out resets and records the final
/// robot to task-object distance.
pub fn eval_final_distance<P: Policy + ?Sized>(
    policy: &P,
    env: EnvKind,
    num_configs: usize,
    horizon: usize,
    seed: u64,
) -> EvalReport {
    let final_distance: Vec<f64> = (0..num_configs)
        .map(|i| {
            let traj = rollout(policy, env, seeds::eval(seed, i), horizon);
            traj.final_state().task_distance() as f64
        })
        .collect();
    EvalReport {
        config: EvalConfig { env, num_configs, horizon, seed },
        summary: Summary::of(&final_distance),
        final_distance,
        action_mse: None,
    }
}

/// Mean over all visited states of `|u_policy - u_expert|^2`, with the
/// expert driving the rollout.
pub fn eval_action_mse<P: Policy + ?Sized>(
    policy: &P,
    env: EnvKind,
    num_configs: usize,
    horizon: usize,
    seed: u64,
) -> f64 {
    let mut total = 0.0f64;
    let mut count = 0usize;
    for i in 0..num_configs {
        let traj = rollout(&Expert, env, seeds::eval(seed, i), horizon);
        for (state, expert_u) in traj.states.iter().zip(&traj.actions) {
            let u = policy.act(state, &state.observe());
            let diff = geom::sub(u, *expert_u);
            total += (diff[0] as f64).powi(2) + (diff[1] as f64).powi(2);
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        total / count as f64
    }
}
