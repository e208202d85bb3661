use rand::seq::SliceRandom;
use rand::Rng;

use super::geom::{self, Vec2};

pub const NUM_OBJECTS: usize = 3;
pub const LINE_Y_RANGE: f32 = 5.0;
pub const CENTER_X_RANGE: f32 = 4.0;
/// Gap between the center object and each neighbour.
pub const GAP_RANGE: (f32, f32) = (1.5, 4.0);
pub const ROBOT_RANGE: f32 = 8.0;
/// Starting robot-target distance bound; keeps the target reachable
/// within a 10-step horizon at unit speed.
pub const MAX_START_DISTANCE: f32 = 9.0;

/// Three objects on a horizontal line; the goal is the middle one.
#[derive(Clone, Debug, PartialEq)]
pub struct StaticWorld {
    pub robot: Vec2,
    pub objects: [Vec2; NUM_OBJECTS],
    pub target_index: usize,
}

/// Index of the object with the median x coordinate, ties to the lowest index.
pub fn median_index(objects: &[Vec2; NUM_OBJECTS]) -> usize {
    let mut order = [0usize, 1, 2];
    // stable sort keeps lower indices first on ties
    order.sort_by(|&a, &b| objects[a][0].total_cmp(&objects[b][0]));
    let mid = objects[order[1]][0];
    (0..NUM_OBJECTS)
        .find(|&i| objects[i][0] == mid)
        .expect("median exists")
}

impl StaticWorld {
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let line_y = rng.random_range(-LINE_Y_RANGE..LINE_Y_RANGE);
        let center = rng.random_range(-CENTER_X_RANGE..CENTER_X_RANGE);
        let mut xs = [
            center - rng.random_range(GAP_RANGE.0..GAP_RANGE.1),
            center,
            center + rng.random_range(GAP_RANGE.0..GAP_RANGE.1),
        ];
        xs.shuffle(rng);
        let objects = xs.map(|x| [x, line_y]);
        let target_index = median_index(&objects);
        let target = objects[target_index];
        let robot = loop {
            let r = [
                rng.random_range(-ROBOT_RANGE..ROBOT_RANGE),
                rng.random_range(-ROBOT_RANGE..ROBOT_RANGE),
            ];
            if geom::distance(r, target) <= MAX_START_DISTANCE {
                break r;
            }
        };
        StaticWorld {
            robot,
            objects,
            target_index,
        }
    }

    pub fn target(&self) -> Vec2 {
        self.objects[self.target_index]
    }

    /// Flat object coordinates `[x0, y0, x1, y1, x2, y2]`.
    pub fn observation(&self) -> Vec<f32> {
        self.objects.iter().flatten().copied().collect()
    }
}
