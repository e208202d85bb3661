//! Records demonstrations and play data, writes them to disk and reads
//! them back.

use recon::beacons::{BeaconConfig, BeaconMode, Placement};
use recon::datasets::{collect_demos, collect_play, DemoDataset, PlayDataset};
use recon::worlds::EnvKind;

fn main() -> recon::Result<()> {
    let dir = tempfile::tempdir().expect("temporary directory");
    let beacon = BeaconConfig::new(BeaconMode::Position, Placement::Partial).with_sigma(0.5);

    let demos = collect_demos(EnvKind::Dynamic2d, &beacon, 4, 10, 11)?;
    let play = collect_play(EnvKind::Dynamic2d, &beacon, 50, 11)?;
    demos.save(&dir.path().join("demos"))?;
    play.save(&dir.path().join("play"))?;

    let demos2 = DemoDataset::load(&dir.path().join("demos"))?;
    let play2 = PlayDataset::load(&dir.path().join("play"))?;
    assert_eq!(demos, demos2);
    assert_eq!(play, play2);

    let m = &demos2.manifest;
    println!(
        "demos: {} transitions, obs {:?}, beacon d = {} ({} placement)",
        demos2.len(),
        m.obs_shape,
        m.d,
        m.beacon.placement
    );
    for t in demos2.transitions().take(3) {
        println!("  x {:?}  b {:?}  u {:?}", t.x, t.b.0, t.u);
    }
    println!("play: {} frames", play2.len());
    for entry in std::fs::read_dir(dir.path().join("demos")).expect("listing") {
        let entry = entry.expect("entry");
        println!("  demos/{} ({} bytes)", entry.file_name().to_string_lossy(), entry.metadata().unwrap().len());
    }
    Ok(())
}
