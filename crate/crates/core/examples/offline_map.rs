//! Builds and cleans the offline map of the bundled street and saves it as OGM1.

use mapdecay::fusion::{build_offline, clean_offline, CleanParams, LogEntry};
use mapdecay::grid::{load_map, save_map};
use mapdecay::scenario::{load_config, mapping_poses, offline_geometry};
use mapdecay::world::simulate_sweep;

fn main() -> anyhow::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/static_street.json").into());
    let cfg = load_config(&path)?;
    let world = cfg.world.without_dynamic();

    let log = mapping_poses(&cfg)
        .into_iter()
        .map(|pose| Ok(LogEntry { pose, sweep: simulate_sweep(&world, &pose, &cfg.sensor, pose.t)? }))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let raw = build_offline(&log, offline_geometry(&cfg)?, &cfg.instant)?;
    let occupied = |g: &mapdecay::grid::GridMap| g.values().iter().filter(|&&v| v > 0.0).count();
    println!("{} sweeps, {} occupied cells before cleaning", log.len(), occupied(raw.grid()));

    let cleaned = clean_offline(raw, &CleanParams::default())?;
    println!("{} occupied after cleaning, {} observed", occupied(cleaned.grid()), cleaned.grid().observed_count());

    let out = std::env::temp_dir().join("mapdecay_offline.ogm");
    save_map(cleaned.grid(), &out)?;
    assert_eq!(&load_map(&out)?, cleaned.grid());
    println!("wrote {}", out.display());
    Ok(())
}
