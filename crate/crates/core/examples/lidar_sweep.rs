//! Simulates one revolution around a parked car and prints the sweep log head.

use mapdecay::world::{simulate_sweep, write_sweep_log, DynamicObject, Pose, Rect, SensorConfig, StaticBox, Trajectory, World};

fn main() -> anyhow::Result<()> {
    let bounds = Rect::new(-50.0, -50.0, 50.0, 50.0)?;
    let wall = StaticBox {
        name: "wall".into(),
        footprint: Rect::new(-20.0, 15.0, 20.0, 16.0)?,
        top: 5.0,
    };
    let car = DynamicObject::new("car", 4.5, 1.8, 1.5, Trajectory::stationary(8.0, 3.0, 0.0))?;
    let world = World::new(0.0, bounds, vec![wall], vec![car])?;
    let sensor = SensorConfig::default();
    println!("blind radius {:.3} m", sensor.blind_radius());

    let sweep = simulate_sweep(&world, &Pose::new(0.0, 0.0, 0.0, 0.0), &sensor, 0.0)?;
    let returns: usize = sweep.scans.iter().map(|s| s.ranges().flatten().count()).sum();
    println!("{} vertical scans, {returns} returns", sweep.scans.len());

    let mut log = Vec::new();
    write_sweep_log(&sweep, &mut log)?;
    // One line per vertical scan: sweep index, azimuth, then one range per beam.
    let text = String::from_utf8(log)?;
    for line in text.lines().take(3) {
        let fields: Vec<&str> = line.split(' ').collect();
        println!("{} ... ({} fields)", fields[..5].join(" "), fields.len());
    }
    Ok(())
}
