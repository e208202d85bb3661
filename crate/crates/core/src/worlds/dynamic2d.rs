use std::f32::consts::PI;

use rand::Rng;

use super::geom::Vec2;

pub const NUM_OBJECTS: usize = 4;
pub const ORBIT_CENTER_RANGE: f32 = 6.0;
pub const ORBIT_RADIUS_MIN: f32 = 1.0;
pub const ORBIT_RADIUS_MAX: f32 = 3.0;
pub const ANGULAR_SPEED_MIN: f32 = PI / 20.0;
pub const ANGULAR_SPEED_MAX: f32 = PI / 10.0;
/// Fastest object moves `2 * 3 * sin(pi / 20) < 1` per step, slower than the
/// robot; starting near the center keeps a 10-step escape inside the walls.
pub const ROBOT_RANGE: f32 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Color {
    Red,
    Green,
    Blue,
    Yellow,
}

impl Color {
    /// Cyclic palette order; object `red_index + j` gets `PALETTE[j]`.
    pub const PALETTE: [Color; 4] = [Color::Red, Color::Green, Color::Blue, Color::Yellow];
    pub const ROBOT: [f32; 3] = [0.0, 0.0, 0.0];

    pub fn rgb(self) -> [f32; 3] {
        match self {
            Color::Red => [1.0, 0.0, 0.0],
            Color::Green => [0.0, 1.0, 0.0],
            Color::Blue => [0.0, 0.0, 1.0],
            Color::Yellow => [1.0, 1.0, 0.0],
        }
    }
}

/// A disk moving on a circle at constant angular velocity.
#[derive(Clone, Debug, PartialEq)]
pub struct OrbitingObject {
    pub orbit_center: Vec2,
    pub orbit_radius: f32,
    pub phase: f32,
    /// Radians per step.
    pub angular_velocity: f32,
    pub color: Color,
}

impl OrbitingObject {
    pub fn position(&self) -> Vec2 {
        [
            self.orbit_center[0] + self.orbit_radius * self.phase.cos(),
            self.orbit_center[1] + self.orbit_radius * self.phase.sin(),
        ]
    }

    pub fn advanced(&self) -> Self {
        OrbitingObject {
            phase: self.phase + self.angular_velocity,
            ..self.clone()
        }
    }
}

/// Orbiting colored disks; the goal is to move away from the red one.
#[derive(Clone, Debug, PartialEq)]
pub struct DynamicWorld {
    pub robot: Vec2,
    pub objects: Vec<OrbitingObject>,
    pub red_index: usize,
}

impl DynamicWorld {
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let red_index = rng.random_range(0..NUM_OBJECTS);
        let objects = (0..NUM_OBJECTS)
            .map(|i| {
                let c = ORBIT_CENTER_RANGE;
                let speed = rng.random_range(ANGULAR_SPEED_MIN..ANGULAR_SPEED_MAX);
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                OrbitingObject {
                    orbit_center: [rng.random_range(-c..c), rng.random_range(-c..c)],
                    orbit_radius: rng.random_range(ORBIT_RADIUS_MIN..ORBIT_RADIUS_MAX),
                    phase: rng.random_range(0.0..2.0 * PI),
                    angular_velocity: sign * speed,
                    color: Color::PALETTE[(i + NUM_OBJECTS - red_index) % NUM_OBJECTS],
                }
            })
            .collect();
        let robot = [
            rng.random_range(-ROBOT_RANGE..ROBOT_RANGE),
            rng.random_range(-ROBOT_RANGE..ROBOT_RANGE),
        ];
        DynamicWorld {
            robot,
            objects,
            red_index,
        }
    }

    pub fn red_position(&self) -> Vec2 {
        self.objects[self.red_index].position()
    }
}
