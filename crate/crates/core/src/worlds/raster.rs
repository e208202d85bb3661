//! 32x32 RGB rasterization of the dynamic world.

use std::io::{self, Write};

use super::{geom::Vec2, Color, DynamicWorld, WORLD_HALF_EXTENT};

pub const IMAGE_SIZE: usize = 32;
pub const IMAGE_CHANNELS: usize = 3;
pub const DISK_RADIUS_PX: f32 = 2.0;

/// Channel-major `[3, 32, 32]` image with values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    data: Vec<f32>,
}

impl Image {
    pub const SHAPE: [usize; 3] = [IMAGE_CHANNELS, IMAGE_SIZE, IMAGE_SIZE];
    pub const LEN: usize = IMAGE_CHANNELS * IMAGE_SIZE * IMAGE_SIZE;

    pub fn white() -> Self {
        Image {
            data: vec![1.0; Self::LEN],
        }
    }

    pub fn from_data(data: Vec<f32>) -> Self {
        assert_eq!(data.len(), Self::LEN, "image needs {} values", Self::LEN);
        Image { data }
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// RGB at column `x`, row `y` (row 0 is the top edge, world y = +10).
    pub fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        let plane = IMAGE_SIZE * IMAGE_SIZE;
        let i = y * IMAGE_SIZE + x;
        [self.data[i], self.data[plane + i], self.data[2 * plane + i]]
    }

    fn set_pixel(&mut self, x: usize, y: usize, rgb: [f32; 3]) {
        let plane = IMAGE_SIZE * IMAGE_SIZE;
        let i = y * IMAGE_SIZE + x;
        for (c, v) in rgb.into_iter().enumerate() {
            self.data[c * plane + i] = v;
        }
    }

    /// Fills every pixel whose center lies within the disk.
    pub fn fill_disk(&mut self, center: Vec2, rgb: [f32; 3]) {
        let [cx, cy] = world_to_pixel(center);
        let r = DISK_RADIUS_PX;
        let lo_x = (cx - r).floor().max(0.0) as usize;
        let lo_y = (cy - r).floor().max(0.0) as usize;
        let hi_x = (cx + r).ceil().min(IMAGE_SIZE as f32);
        let hi_y = (cy + r).ceil().min(IMAGE_SIZE as f32);
        if hi_x <= 0.0 || hi_y <= 0.0 {
            return;
        }
        for y in lo_y..hi_y as usize {
            for x in lo_x..hi_x as usize {
                let dx = x as f32 + 0.5 - cx;
                let dy = y as f32 + 0.5 - cy;
                if dx * dx + dy * dy <= r * r {
                    self.set_pixel(x, y, rgb);
                }
            }
        }
    }

    /// Binary PPM (P6, maxval 255).
    pub fn write_ppm<W: Write>(&self, mut out: W) -> io::Result<()> {
        write!(out, "P6\n{IMAGE_SIZE} {IMAGE_SIZE}\n255\n")?;
        let mut bytes = Vec::with_capacity(IMAGE_SIZE * IMAGE_SIZE * 3);
        for y in 0..IMAGE_SIZE {
            for x in 0..IMAGE_SIZE {
                for v in self.pixel(x, y) {
                    bytes.push((v.clamp(0.0, 1.0) * 255.0).round() as u8);
                }
            }
        }
        out.write_all(&bytes)
    }
}

/// Continuous pixel coordinates (column, row) of a world point.
pub fn world_to_pixel(p: Vec2) -> [f32; 2] {
    let scale = IMAGE_SIZE as f32 / (2.0 * WORLD_HALF_EXTENT);
    [
        (p[0] + WORLD_HALF_EXTENT) * scale,
        (WORLD_HALF_EXTENT - p[1]) * scale,
    ]
}

/// Objects in index order, then the robot on top.
pub fn render(world: &DynamicWorld) -> Image {
    let mut img = Image::white();
    for obj in &world.objects {
        img.fill_disk(obj.position(), obj.color.rgb());
    }
    img.fill_disk(world.robot, Color::ROBOT);
    img
}
