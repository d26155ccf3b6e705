//! Turns one sweep into free and occupied evidence and renders it.

use mapdecay::grid::{GridGeometry, GridMap};
use mapdecay::instant::{apply_instant, build_instant_map, CellKind, InstantConfig};
use mapdecay::scenario::render_frame;
use mapdecay::world::{simulate_sweep, Pose, Rect, SensorConfig, StaticBox, World};

fn main() -> anyhow::Result<()> {
    let bounds = Rect::new(-40.0, -40.0, 40.0, 40.0)?;
    let boxes = vec![
        StaticBox { name: "kiosk".into(), footprint: Rect::new(6.0, -2.0, 9.0, 2.0)?, top: 3.0 },
        StaticBox { name: "hedge".into(), footprint: Rect::new(-15.0, 10.0, 5.0, 11.0)?, top: 1.2 },
    ];
    let world = World::new(0.0, bounds, boxes, Vec::new())?;
    let sweep = simulate_sweep(&world, &Pose::new(0.0, 0.0, 0.0, 0.0), &SensorConfig::default(), 0.0)?;

    let geometry = GridGeometry::covering(0.2, -40.0, -40.0, 40.0, 40.0)?;
    let cfg = InstantConfig::default();
    let inst = build_instant_map(&sweep, &geometry, &cfg)?;
    println!(
        "free={} occupied={} untouched={}",
        inst.count(CellKind::FreeSet),
        inst.count(CellKind::OccupiedEvidence),
        inst.count(CellKind::Untouched)
    );

    let mut map = GridMap::new(geometry);
    apply_instant(&mut map, &inst, &cfg.bounds)?;
    let out = std::env::temp_dir().join("mapdecay_instant.ppm");
    render_frame(&map, &out)?;
    println!("wrote {}", out.display());
    Ok(())
}
