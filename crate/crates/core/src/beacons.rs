//! Simulated beacons: which object carries a tag, what the tag transmits,
//! and how noisy the reading is.
//!
//! Beacons exist only while demonstrations and play data are recorded.
//! Every call to [`BeaconConfig::measure`] bumps a per-thread counter so
//! evaluation code can prove it never consulted one.

use std::cell::Cell;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::worlds::{geom, Vec2, WorldState};
use crate::{Error, Result};

/// Noise levels used in the placement/noise ablation.
pub const ABLATION_SIGMAS: [f32; 3] = [2.5, 4.5, 6.5];

thread_local! {
    static MEASURE_CALLS: Cell<u64> = const { Cell::new(0) };
}

/// Number of beacon measurements taken on the current thread so far.
pub fn measure_calls() -> u64 {
    MEASURE_CALLS.with(Cell::get)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BeaconMode {
    /// Tagged object's `(x, y)`.
    Position,
    /// Distance from the tagged object to the anchor.
    Distance,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    #[default]
    X,
    Y,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Placement {
    #[serde(rename = "exact")]
    Exact,
    /// Task object's coordinate along one axis.
    #[serde(rename = "partial")]
    Partial,
    /// An object adjacent to the task object.
    #[serde(rename = "other")]
    Other,
    /// A uniformly chosen object, fixed for one demonstration.
    #[serde(rename = "random")]
    Random,
    #[serde(rename = "exact+other")]
    ExactPlusOther,
    #[serde(rename = "exact+random")]
    ExactPlusRandom,
}

impl Placement {
    pub const ALL: [Placement; 6] = [
        Placement::Exact,
        Placement::Partial,
        Placement::Other,
        Placement::Random,
        Placement::ExactPlusOther,
        Placement::ExactPlusRandom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Placement::Exact => "exact",
            Placement::Partial => "partial",
            Placement::Other => "other",
            Placement::Random => "random",
            Placement::ExactPlusOther => "exact+other",
            Placement::ExactPlusRandom => "exact+random",
        }
    }

    pub fn uses_random(self) -> bool {
        matches!(self, Placement::Random | Placement::ExactPlusRandom)
    }
}

impl fmt::Display for Placement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Placement {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let norm = s.to_ascii_lowercase().replace(['_', '-'], "+");
        Placement::ALL
            .into_iter()
            .find(|p| p.name() == norm)
            .ok_or_else(|| {
                format!("unknown placement {s:?} (expected exact, partial, other, random, exact+other or exact+random)")
            })
    }
}

impl FromStr for BeaconMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "position" => Ok(BeaconMode::Position),
            "distance" => Ok(BeaconMode::Distance),
            _ => Err(format!("unknown beacon mode {s:?} (expected position or distance)")),
        }
    }
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            _ => Err(format!("unknown axis {s:?} (expected x or y)")),
        }
    }
}

/// One beacon vector `b` in world units.
#[derive(Clone, Debug, PartialEq)]
pub struct BeaconReading(pub Vec<f32>);

impl BeaconReading {
    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeaconConfig {
    pub mode: BeaconMode,
    pub placement: Placement,
    pub axis: Axis,
    #[serde(rename = "sigma")]
    pub noise_sigma: f32,
    pub anchor: Vec2,
    /// Tagged object for random placements, fixed by [`BeaconConfig::place`].
    #[serde(skip)]
    pub random_assignment: Option<usize>,
}

impl Default for BeaconConfig {
    fn default() -> Self {
        BeaconConfig::new(BeaconMode::Position, Placement::Exact)
    }
}

impl BeaconConfig {
    pub fn new(mode: BeaconMode, placement: Placement) -> Self {
        BeaconConfig {
            mode,
            placement,
            axis: Axis::X,
            noise_sigma: 0.0,
            anchor: [0.0, 0.0],
            random_assignment: None,
        }
    }

    pub fn with_sigma(mut self, sigma: f32) -> Self {
        self.noise_sigma = sigma;
        self
    }

    pub fn with_axis(mut self, axis: Axis) -> Self {
        self.axis = axis;
        self
    }

    /// Distance readings exist only for the exact placement; every other
    /// placement transmits positions.
    pub fn validate(&self) -> Result<()> {
        if self.mode == BeaconMode::Distance && self.placement != Placement::Exact {
            return Err(Error::contract(format!(
                "distance beacons support only the exact placement, got {}",
                self.placement
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::contract(format!(
                "noise sigma must be finite and non-negative, got {}",
                self.noise_sigma
            )));
        }
        Ok(())
    }

    /// Output dimension `d`.
    pub fn dim(&self) -> usize {
        match (self.placement, self.mode) {
            (Placement::Exact, BeaconMode::Position) => 2,
            (Placement::Exact, BeaconMode::Distance) => 1,
            (Placement::Partial, _) => 1,
            (Placement::Other | Placement::Random, _) => 2,
            (Placement::ExactPlusOther | Placement::ExactPlusRandom, _) => 4,
        }
    }

    /// Resolves per-episode choices. Call once at the start of each episode.
    pub fn place<R: Rng + ?Sized>(&self, state: &WorldState, rng: &mut R) -> BeaconConfig {
        let mut placed = self.clone();
        placed.random_assignment = self
            .placement
            .uses_random()
            .then(|| rng.random_range(0..state.kind().num_objects()));
        placed
    }

    /// Objects carrying a beacon, in reading order.
    pub fn tagged_objects(&self, state: &WorldState) -> Result<Vec<usize>> {
        let task = state.task_index();
        let random = || {
            self.random_assignment.ok_or_else(|| {
                Error::contract("random placement used before place() resolved the tagged object")
            })
        };
        Ok(match self.placement {
            Placement::Exact | Placement::Partial => vec![task],
            Placement::Other => vec![other_index(state)],
            Placement::Random => vec![random()?],
            Placement::ExactPlusOther => vec![task, other_index(state)],
            Placement::ExactPlusRandom => vec![task, random()?],
        })
    }

    /// Noise-free reading.
    pub fn clean_reading(&self, state: &WorldState) -> Result<Vec<f32>> {
        let tagged = self.tagged_objects(state)?;
        let mut b = Vec::with_capacity(self.dim());
        for (slot, &idx) in tagged.iter().enumerate() {
            let p = state.object_position(idx);
            match self.placement {
                Placement::Partial => b.push(match self.axis {
                    Axis::X => p[0],
                    Axis::Y => p[1],
                }),
                Placement::Exact if self.mode == BeaconMode::Distance && slot == 0 => {
                    b.push(geom::distance(p, self.anchor))
                }
                _ => b.extend_from_slice(&p),
            }
        }
        Ok(b)
    }

    /// One reading with i.i.d. Gaussian noise per coordinate.
    pub fn measure<R: Rng + ?Sized>(&self, state: &WorldState, rng: &mut R) -> Result<BeaconReading> {
        MEASURE_CALLS.with(|c| c.set(c.get() + 1));
        let mut b = self.clean_reading(state)?;
        assert_eq!(b.len(), self.dim(), "beacon reading width must equal d");
        if self.noise_sigma > 0.0 {
            let normal = Normal::new(0.0f32, self.noise_sigma).expect("sigma validated");
            for v in &mut b {
                *v += normal.sample(rng);
            }
        }
        Ok(BeaconReading(b))
    }
}

/// The object "adjacent" to the task object: next index cyclically in the
/// dynamic world, nearest non-target object in the static world.
pub fn other_index(state: &WorldState) -> usize {
    match state {
        WorldState::Dynamic(w) => (w.red_index + 1) % w.objects.len(),
        WorldState::Static(w) => {
            let target = w.target();
            (0..w.objects.len())
                .filter(|&i| i != w.target_index)
                .min_by(|&a, &b| {
                    geom::distance(w.objects[a], target)
                        .total_cmp(&geom::distance(w.objects[b], target))
                })
                .expect("static world has non-target objects")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::worlds::{reset, Color, DynamicWorld, EnvKind, OrbitingObject, StaticWorld};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn static_at(target: Vec2) -> WorldState {
        WorldState::Static(StaticWorld {
            robot: [0.0, 0.0],
            objects: [[-8.0, target[1]], target, [8.0, target[1]]],
            target_index: 1,
        })
    }

    #[test]
    fn distance_mode_three_four_five() {
        let cfg = BeaconConfig::new(BeaconMode::Distance, Placement::Exact);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let b = cfg.measure(&static_at([3.0, 4.0]), &mut rng).unwrap();
        assert_eq!(b.0, vec![5.0]);
    }

    #[test]
    fn position_mode_reports_coordinates() {
        let cfg = BeaconConfig::new(BeaconMode::Position, Placement::Exact);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let b = cfg.measure(&static_at([-2.0, 7.0]), &mut rng).unwrap();
        assert_eq!(b.0, vec![-2.0, 7.0]);
    }

    #[test]
    fn partial_reads_one_axis() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = static_at([-2.0, 3.0]);
        let x = BeaconConfig::new(BeaconMode::Position, Placement::Partial);
        assert_eq!(x.measure(&s, &mut rng).unwrap().0, vec![-2.0]);
        let y = x.with_axis(Axis::Y);
        assert_eq!(y.measure(&s, &mut rng).unwrap().0, vec![3.0]);
    }

    #[test]
    fn dims_match_table() {
        use BeaconMode::*;
        use Placement::*;
        let cases = [
            (Position, Exact, 2),
            (Distance, Exact, 1),
            (Position, Partial, 1),
            (Position, Other, 2),
            (Position, Random, 2),
            (Position, ExactPlusOther, 4),
            (Position, ExactPlusRandom, 4),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (mode, placement, d) in cases {
            let cfg = BeaconConfig::new(mode, placement);
            assert_eq!(cfg.dim(), d);
            for kind in [EnvKind::Static2d, EnvKind::Dynamic2d] {
                let s = reset(kind, 3);
                let placed = cfg.place(&s, &mut rng);
                assert_eq!(placed.measure(&s, &mut rng).unwrap().dim(), d);
            }
        }
    }

    #[test]
    fn distance_with_non_exact_placement_is_rejected() {
        let cfg = BeaconConfig::new(BeaconMode::Distance, Placement::Other);
        assert!(cfg.validate().is_err());
        assert!(BeaconConfig::default().with_sigma(-1.0).validate().is_err());
    }

    #[test]
    fn exact_tags_the_task_object() {
        for kind in [EnvKind::Static2d, EnvKind::Dynamic2d] {
            let s = reset(kind, 11);
            let cfg = BeaconConfig::default();
            assert_eq!(cfg.tagged_objects(&s).unwrap(), vec![s.task_index()]);
        }
    }

    #[test]
    fn other_is_next_index_after_red() {
        for seed in 0..50 {
            let s = reset(EnvKind::Dynamic2d, seed);
            let WorldState::Dynamic(w) = &s else { unreachable!() };
            let other = other_index(&s);
            assert_eq!(other, (w.red_index + 1) % 4);
            assert_eq!(w.objects[other].color, Color::Green);
        }
    }

    #[test]
    fn other_in_static_is_nearest_non_target() {
        let s = WorldState::Static(StaticWorld {
            robot: [0.0, 0.0],
            objects: [[-6.0, 0.0], [0.0, 0.0], [2.0, 0.0]],
            target_index: 1,
        });
        assert_eq!(other_index(&s), 2);
    }

    #[test]
    fn unresolved_random_is_a_contract_violation() {
        let cfg = BeaconConfig::new(BeaconMode::Position, Placement::Random);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = reset(EnvKind::Dynamic2d, 0);
        assert!(matches!(cfg.measure(&s, &mut rng), Err(Error::Contract(_))));
    }

    #[test]
    fn random_assignment_is_uniform() {
        // binomial(1000, 1/4): mean 250, 3 sd = 41.1
        let cfg = BeaconConfig::new(BeaconMode::Position, Placement::Random);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let s = reset(EnvKind::Dynamic2d, 0);
        let mut counts = [0usize; 4];
        for _ in 0..1000 {
            counts[cfg.place(&s, &mut rng).random_assignment.unwrap()] += 1;
        }
        let bound = 3.0 * (1000.0f64 * 0.25 * 0.75).sqrt();
        for c in counts {
            assert!((c as f64 - 250.0).abs() <= bound, "{counts:?}");
        }
    }

    #[test]
    fn noise_has_requested_spread() {
        let cfg = BeaconConfig::default().with_sigma(2.5);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = static_at([1.0, -1.0]);
        let draws: Vec<_> = (0..10_000).map(|_| cfg.measure(&s, &mut rng).unwrap().0).collect();
        for (coord, clean) in [(0usize, 1.0f64), (1, -1.0)] {
            let n = draws.len() as f64;
            let mean = draws.iter().map(|b| b[coord] as f64).sum::<f64>() / n;
            let var = draws.iter().map(|b| (b[coord] as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
            assert!((var.sqrt() - 2.5).abs() < 0.1, "sd {}", var.sqrt());
            assert!((mean - clean).abs() < 0.1);
        }
    }

    #[test]
    fn readings_track_objects_not_robot() {
        let cfg = BeaconConfig::new(BeaconMode::Distance, Placement::Exact);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let obj = OrbitingObject {
            orbit_center: [2.0, 0.0],
            orbit_radius: 1.0,
            phase: 0.0,
            angular_velocity: 0.0,
            color: Color::Red,
        };
        let a = WorldState::Dynamic(DynamicWorld { robot: [0.0, 0.0], objects: vec![obj.clone()], red_index: 0 });
        let b = WorldState::Dynamic(DynamicWorld { robot: [-7.0, 5.0], objects: vec![obj], red_index: 0 });
        assert_eq!(cfg.measure(&a, &mut rng).unwrap(), cfg.measure(&b, &mut rng).unwrap());
    }

    #[test]
    fn counter_counts_measurements() {
        let before = measure_calls();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = reset(EnvKind::Static2d, 0);
        for _ in 0..3 {
            BeaconConfig::default().measure(&s, &mut rng).unwrap();
        }
        assert_eq!(measure_calls() - before, 3);
    }

    #[test]
    fn manifest_json_shape() {
        let cfg = BeaconConfig::new(BeaconMode::Position, Placement::ExactPlusOther).with_sigma(2.5);
        let v = serde_json::to_value(&cfg).unwrap();
        assert_eq!(
            v,
            serde_json::json!({"mode": "position", "placement": "exact+other", "axis": "x", "sigma": 2.5, "anchor": [0.0, 0.0]})
        );
    }
}
