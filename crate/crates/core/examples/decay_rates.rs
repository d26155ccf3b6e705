//! Runs the overtaking scenario step by step under several decay weightings
//! and compares how long the trace left in the sensor's blind spot survives.

use mapdecay::grid::DecayParams;
use mapdecay::scenario::{load_config, obtain_offline_map, OnlineRun};

fn main() -> anyhow::Result<()> {
    let mut cfg = load_config(concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/overtaking.json"))?;
    cfg.duration = 14.0;
    let offline = obtain_offline_map(&cfg)?;
    let blind = cfg.sensor.blind_radius();

    for (w_on, w_off) in [(20.0, 1.0), (10.0, 1.0), (4.0, 1.0), (1.0, 1.0)] {
        cfg.decay = DecayParams::new(w_on, w_off)?;
        let mut run = OnlineRun::new(&cfg, &offline)?;
        let mut dev = Vec::new();
        while let Some(out) = run.step()? {
            let online = run.online();
            let g = online.geometry();
            let ego = out.sweep.ego_pose;
            // Largest deviation from the offline map inside the blind disc.
            let d = (0..g.len())
                .filter(|&i| {
                    let (x, y) = g.cell_center(g.cell_at(i));
                    (x - ego.x).hypot(y - ego.y) < blind && online.offline_view().values()[i] < 0.0
                })
                .map(|i| (online.grid().values()[i] - online.offline_view().values()[i]).abs())
                .fold(0.0, f64::max);
            dev.push(d);
        }
        let peak = dev.iter().copied().enumerate().fold((0, 0.0), |a, (k, d)| if d >= a.1 { (k, d) } else { a });
        let gone = dev[peak.0..].iter().position(|&d| d < 0.1);
        println!(
            "w_on={w_on:>4} w_off={w_off}: retention {:.3}, peak {:.2} at tick {}, below 0.1 after {}",
            cfg.decay.retention(),
            peak.1,
            peak.0,
            gone.map_or("more than the run".into(), |k| format!("{k} ticks"))
        );
    }
    Ok(())
}
