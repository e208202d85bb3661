//! The two point-robot environments, their scripted experts, and the
//! image renderer for the dynamic one.
//!
//! World states are plain values: [`step`] returns a new state and never
//! mutates its input.

mod dynamic2d;
pub mod geom;
mod raster;
mod static2d;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use dynamic2d::{Color, DynamicWorld, OrbitingObject};
pub use geom::Vec2;
pub use raster::{render, world_to_pixel, Image, IMAGE_SIZE};
pub use static2d::{median_index, StaticWorld};

pub const WORLD_HALF_EXTENT: f32 = 10.0;
pub const MAX_SPEED: f32 = 1.0;
pub const EXPERT_GAIN: f32 = 1.0;
pub const DEFAULT_HORIZON: usize = 10;
/// Robot state dimension.
pub const ROBOT_DIM: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvKind {
    Static2d,
    Dynamic2d,
}

impl EnvKind {
    pub fn name(self) -> &'static str {
        match self {
            EnvKind::Static2d => "static2d",
            EnvKind::Dynamic2d => "dynamic2d",
        }
    }

    pub fn num_objects(self) -> usize {
        match self {
            EnvKind::Static2d => static2d::NUM_OBJECTS,
            EnvKind::Dynamic2d => dynamic2d::NUM_OBJECTS,
        }
    }

    pub fn obs_kind(self) -> ObsKind {
        match self {
            EnvKind::Static2d => ObsKind::Vector,
            EnvKind::Dynamic2d => ObsKind::Image,
        }
    }

    pub fn obs_shape(self) -> Vec<usize> {
        match self {
            EnvKind::Static2d => vec![2 * static2d::NUM_OBJECTS],
            EnvKind::Dynamic2d => Image::SHAPE.to_vec(),
        }
    }

    pub fn obs_len(self) -> usize {
        self.obs_shape().iter().product()
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "static2d" => Ok(EnvKind::Static2d),
            "dynamic2d" => Ok(EnvKind::Dynamic2d),
            _ => Err(format!("unknown environment {s:?} (expected static2d or dynamic2d)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObsKind {
    Vector,
    Image,
}

/// What the robot perceives besides its own position.
#[derive(Clone, Debug, PartialEq)]
pub enum Observation {
    /// Flat object coordinates (static world).
    Vector(Vec<f32>),
    /// Rendered RGB frame (dynamic world).
    Image(Image),
}

impl Observation {
    pub fn as_slice(&self) -> &[f32] {
        match self {
            Observation::Vector(v) => v,
            Observation::Image(img) => img.data(),
        }
    }

    pub fn kind(&self) -> ObsKind {
        match self {
            Observation::Vector(_) => ObsKind::Vector,
            Observation::Image(_) => ObsKind::Image,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum WorldState {
    Static(StaticWorld),
    Dynamic(DynamicWorld),
}

impl WorldState {
    pub fn kind(&self) -> EnvKind {
        match self {
            WorldState::Static(_) => EnvKind::Static2d,
            WorldState::Dynamic(_) => EnvKind::Dynamic2d,
        }
    }

    pub fn robot(&self) -> Vec2 {
        match self {
            WorldState::Static(w) => w.robot,
            WorldState::Dynamic(w) => w.robot,
        }
    }

    /// Index of the task-relevant object: the center object or the red one.
    pub fn task_index(&self) -> usize {
        match self {
            WorldState::Static(w) => w.target_index,
            WorldState::Dynamic(w) => w.red_index,
        }
    }

    pub fn object_positions(&self) -> Vec<Vec2> {
        match self {
            WorldState::Static(w) => w.objects.to_vec(),
            WorldState::Dynamic(w) => w.objects.iter().map(OrbitingObject::position).collect(),
        }
    }

    pub fn object_position(&self, index: usize) -> Vec2 {
        match self {
            WorldState::Static(w) => w.objects[index],
            WorldState::Dynamic(w) => w.objects[index].position(),
        }
    }

    pub fn task_position(&self) -> Vec2 {
        self.object_position(self.task_index())
    }

    /// Distance from the robot to the task-relevant object.
    pub fn task_distance(&self) -> f32 {
        geom::distance(self.robot(), self.task_position())
    }

    pub fn observe(&self) -> Observation {
        match self {
            WorldState::Static(w) => Observation::Vector(w.observation()),
            WorldState::Dynamic(w) => Observation::Image(render(w)),
        }
    }
}

/// Deterministic initial state for `seed`.
pub fn reset(kind: EnvKind, seed: u64) -> WorldState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match kind {
        EnvKind::Static2d => WorldState::Static(StaticWorld::sample(&mut rng)),
        EnvKind::Dynamic2d => WorldState::Dynamic(DynamicWorld::sample(&mut rng)),
    }
}

pub fn clip_to_bounds(p: Vec2) -> Vec2 {
    p.map(|c| c.clamp(-WORLD_HALF_EXTENT, WORLD_HALF_EXTENT))
}

/// Applies a velocity command, capped at [`MAX_SPEED`].
///
/// # Panics
/// If either action component is not finite.
pub fn step(state: &WorldState, action: Vec2) -> WorldState {
    assert!(
        action.iter().all(|a| a.is_finite()),
        "action components must be finite, got {action:?}"
    );
    let delta = geom::clamp_norm(action, MAX_SPEED);
    let robot = clip_to_bounds(geom::add(state.robot(), delta));
    match state {
        WorldState::Static(w) => WorldState::Static(StaticWorld { robot, ..w.clone() }),
        WorldState::Dynamic(w) => WorldState::Dynamic(DynamicWorld {
            robot,
            objects: w.objects.iter().map(OrbitingObject::advanced).collect(),
            red_index: w.red_index,
        }),
    }
}

/// Scripted demonstrator: reach the center object, or flee the red one.
pub fn expert_action(state: &WorldState) -> Vec2 {
    match state {
        WorldState::Static(w) => geom::clamp_norm(
            geom::scale(geom::sub(w.target(), w.robot), EXPERT_GAIN),
            MAX_SPEED,
        ),
        WorldState::Dynamic(w) => {
            let away = geom::sub(w.robot, w.red_position());
            let n = geom::norm(away);
            if n > 0.0 {
                geom::scale(away, MAX_SPEED / n)
            } else {
                [MAX_SPEED, 0.0]
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f32::consts::PI;

    #[test]
    fn reset_is_deterministic() {
        for kind in [EnvKind::Static2d, EnvKind::Dynamic2d] {
            assert_eq!(reset(kind, 42), reset(kind, 42));
            assert_ne!(reset(kind, 42), reset(kind, 43));
        }
    }

    #[test]
    fn static_resets_respect_bounds_and_separation() {
        for seed in 0..1000 {
            let WorldState::Static(w) = reset(EnvKind::Static2d, seed) else { unreachable!() };
            for (i, a) in w.objects.iter().enumerate() {
                assert!(a[0].abs() <= 8.0 && a[1].abs() <= 5.0);
                assert_eq!(a[1], w.objects[0][1]);
                for b in &w.objects[i + 1..] {
                    assert!((a[0] - b[0]).abs() >= 1.0);
                }
            }
            assert!(w.robot.iter().all(|c| c.abs() <= WORLD_HALF_EXTENT));
            assert_eq!(w.target_index, median_index(&w.objects));
        }
    }

    #[test]
    fn median_ties_go_to_lowest_index() {
        assert_eq!(median_index(&[[1.0, 0.0], [1.0, 0.0], [5.0, 0.0]]), 0);
        assert_eq!(median_index(&[[3.0, 0.0], [-1.0, 0.0], [0.0, 0.0]]), 2);
    }

    #[test]
    fn dynamic_resets_have_one_red() {
        for seed in 0..1000 {
            let WorldState::Dynamic(w) = reset(EnvKind::Dynamic2d, seed) else { unreachable!() };
            let reds: Vec<_> = w
                .objects
                .iter()
                .enumerate()
                .filter(|(_, o)| o.color == Color::Red)
                .collect();
            assert_eq!(reds.len(), 1);
            assert_eq!(reds[0].0, w.red_index);
        }
    }

    #[test]
    fn zero_action_leaves_static_world_unchanged() {
        let s = reset(EnvKind::Static2d, 7);
        assert_eq!(step(&s, [0.0, 0.0]), s);
    }

    #[test]
    fn action_is_speed_capped() {
        let s = WorldState::Static(StaticWorld {
            robot: [0.0, 0.0],
            objects: [[-3.0, 1.0], [0.0, 1.0], [3.0, 1.0]],
            target_index: 1,
        });
        assert_eq!(step(&s, [10.0, 0.0]).robot(), [1.0, 0.0]);
    }

    #[test]
    fn robot_is_clipped_to_bounds() {
        let s = WorldState::Static(StaticWorld {
            robot: [9.8, -9.9],
            objects: [[-3.0, 1.0], [0.0, 1.0], [3.0, 1.0]],
            target_index: 1,
        });
        assert_eq!(step(&s, [0.7, -0.7]).robot(), [10.0, -10.0]);
    }

    #[test]
    #[should_panic(expected = "must be finite")]
    fn non_finite_action_is_rejected() {
        step(&reset(EnvKind::Static2d, 0), [f32::NAN, 0.0]);
    }

    #[test]
    fn quarter_turn_rotation() {
        let s = WorldState::Dynamic(DynamicWorld {
            robot: [0.0, 0.0],
            objects: vec![OrbitingObject {
                orbit_center: [1.0, 1.0],
                orbit_radius: 2.0,
                phase: 0.0,
                angular_velocity: PI / 2.0,
                color: Color::Red,
            }],
            red_index: 0,
        });
        assert_eq!(s.object_position(0), [3.0, 1.0]);
        let p = step(&s, [0.0, 0.0]).object_position(0);
        assert!((p[0] - 1.0).abs() < 1e-6 && (p[1] - 3.0).abs() < 1e-6, "{p:?}");
    }

    #[test]
    fn static_expert_examples() {
        let mk = |target: Vec2| {
            WorldState::Static(StaticWorld {
                robot: [0.0, 0.0],
                objects: [[-9.0, 0.0], target, [9.0, 0.0]],
                target_index: 1,
            })
        };
        assert_eq!(expert_action(&mk([0.3, 0.0])), [0.3, 0.0]);
        assert_eq!(expert_action(&mk([5.0, 0.0])), [1.0, 0.0]);
    }

    #[test]
    fn static_expert_reaches_target_within_horizon() {
        for seed in 0..1000 {
            let mut s = reset(EnvKind::Static2d, seed);
            for _ in 0..DEFAULT_HORIZON {
                s = step(&s, expert_action(&s));
            }
            assert!(s.task_distance() < 0.2, "seed {seed}: {}", s.task_distance());
        }
    }

    #[test]
    fn dynamic_expert_flees_along_x_when_on_top_of_red() {
        let s = WorldState::Dynamic(DynamicWorld {
            robot: [3.0, 1.0],
            objects: vec![OrbitingObject {
                orbit_center: [1.0, 1.0],
                orbit_radius: 2.0,
                phase: 0.0,
                angular_velocity: 0.1,
                color: Color::Red,
            }],
            red_index: 0,
        });
        assert_eq!(expert_action(&s), [1.0, 0.0]);
    }

    #[test]
    fn dynamic_expert_distance_grows_every_step() {
        for seed in 0..100 {
            let mut s = reset(EnvKind::Dynamic2d, seed);
            let mut d = s.task_distance();
            for t in 0..DEFAULT_HORIZON {
                s = step(&s, expert_action(&s));
                let next = s.task_distance();
                assert!(next > d, "seed {seed} step {t}: {d} -> {next}");
                d = next;
            }
        }
    }
}
