//! Full two-phase run: a car overtakes a parked ego and leaves a trace in the
//! blind spot that decay removes again. Writes frames and metrics to the
//! scenario's output directory.

use mapdecay::scenario::load_config;

fn main() -> anyhow::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/overtaking.json").into());
    let cfg = load_config(&path)?;
    let report = mapdecay::scenario::run_scenario(&cfg)?;
    println!("{}", report.summary_line());

    let m = &report.metrics;
    println!("peak deviation {:.3} at tick {}", m.peak_trace_dev, m.peak_tick);
    for t in m.ticks.iter().skip(m.peak_tick).step_by(10).take(8) {
        println!("  tick {:4} t={:5.2}s dev={:8.4} iou={:.3}", t.tick, t.t_sec, t.trace_max_dev, t.iou);
    }
    println!("{} files under {}", report.artifacts.len(), cfg.output_dir.display());
    Ok(())
}
