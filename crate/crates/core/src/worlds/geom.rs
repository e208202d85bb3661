/// A point or vector in world units.
pub type Vec2 = [f32; 2];

pub fn sub(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

pub fn add(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] + b[0], a[1] + b[1]]
}

pub fn scale(a: Vec2, s: f32) -> Vec2 {
    [a[0] * s, a[1] * s]
}

pub fn norm(a: Vec2) -> f32 {
    a[0].hypot(a[1])
}

pub fn distance(a: Vec2, b: Vec2) -> f32 {
    norm(sub(a, b))
}

/// Rescales `v` onto the disk of radius `max_norm` if it lies outside.
pub fn clamp_norm(v: Vec2, max_norm: f32) -> Vec2 {
    let n = norm(v);
    if n > max_norm {
        scale(v, max_norm / n)
    } else {
        v
    }
}
