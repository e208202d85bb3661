//! Renders a few frames of the dynamic world, with the expert driving,
//! to PPM files.
//!
//! ```text
//! cargo run --example render_scene -- /tmp/frames
//! ```

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use recon::worlds::{self, render, EnvKind, WorldState};

fn main() -> std::io::Result<()> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(std::env::temp_dir);
    std::fs::create_dir_all(&dir)?;
    let mut state = worlds::reset(EnvKind::Dynamic2d, 7);
    for t in 0..=worlds::DEFAULT_HORIZON {
        let WorldState::Dynamic(world) = &state else { unreachable!() };
        let path = dir.join(format!("frame_{t:02}.ppm"));
        render(world).write_ppm(BufWriter::new(File::create(&path)?))?;
        println!(
            "t={t:2} robot ({:6.2}, {:6.2})  distance to red {:.3}  -> {}",
            world.robot[0],
            world.robot[1],
            state.task_distance(),
            path.display()
        );
        state = worlds::step(&state, worlds::expert_action(&state));
    }
    Ok(())
}
