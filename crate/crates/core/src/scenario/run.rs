//! Two-phase scenario runs: the mapping drive that produces the offline map,
//! then the online replay with moving objects.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use thiserror::Error;

use super::config::{ConfigError, ScenarioConfig};
use super::metrics::{metrics_for_region, write_metrics_csv, FrameSample, MetricsError, Overlap, RunMetrics, TraceRegion};
use super::render::render_frame;
use crate::fusion::{clean_offline, online_init, FusionError, OfflineBuilder, OfflineMap, OnlineMap};
use crate::grid::{load_map, CellIndex, logodds_from_prob, save_map, GridError, GridGeometry, GridMap, LogOdds, MapIoError};
use crate::instant::{CellKind, InstantMap};
use crate::world::{simulate_sweep, write_sweep_log, Pose, Rect, Sweep, WorldError};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    MapIo(#[from] MapIoError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ScenarioError + '_ {
    move |source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Probability above which a static-obstacle cell counts as held.
pub const STATIC_HOLD_PROB: f64 = 0.9;

/// Offline grid covering the world bounds.
pub fn offline_geometry(cfg: &ScenarioConfig) -> Result<GridGeometry, GridError> {
    let b = cfg.world.bounds();
    GridGeometry::covering(cfg.resolution, b.min_x, b.min_y, b.max_x, b.max_y)
}

/// Poses of the mapping drive, one per tick.
pub fn mapping_poses(cfg: &ScenarioConfig) -> Vec<Pose> {
    match &cfg.offline_ego {
        Some(tr) => {
            let (t0, t1) = (tr.start_time(), tr.end_time());
            let n = ((t1 - t0) * cfg.tick_rate).floor() as usize + 1;
            (0..n).map(|k| tr.pose_at(t0 + k as f64 / cfg.tick_rate)).collect()
        }
        None => (0..cfg.tick_count()).map(|k| cfg.ego.pose_at(cfg.tick_time(k))).collect(),
    }
}

/// Phase 1: drives the mapping trajectory through the static world, then cleans the result.
pub fn build_offline_map(cfg: &ScenarioConfig) -> Result<OfflineMap, ScenarioError> {
    let world = cfg.world.without_dynamic();
    let mut builder = OfflineBuilder::new(offline_geometry(cfg)?, cfg.instant);
    for pose in mapping_poses(cfg) {
        let sweep = simulate_sweep(&world, &pose, &cfg.sensor, pose.t)?;
        builder.add(&pose, &sweep)?;
    }
    Ok(clean_offline(builder.finish(), &cfg.clean)?)
}

/// The configured prebuilt offline map, or a freshly built one.
pub fn obtain_offline_map(cfg: &ScenarioConfig) -> Result<OfflineMap, ScenarioError> {
    match &cfg.offline_map {
        Some(path) => Ok(OfflineMap::from_grid(load_map(path)?)),
        None => build_offline_map(cfg),
    }
}

/// Output of one online tick.
#[derive(Debug, Clone)]
pub struct TickOutput {
    pub tick: usize,
    pub t: f64,
    pub sweep: Sweep,
    pub instant: InstantMap,
}

/// Phase 2 state: the online map and the position in the tick sequence.
#[derive(Debug, Clone)]
pub struct OnlineRun<'a> {
    cfg: &'a ScenarioConfig,
    offline: &'a OfflineMap,
    online: OnlineMap,
    next: usize,
}

impl<'a> OnlineRun<'a> {
    pub fn new(cfg: &'a ScenarioConfig, offline: &'a OfflineMap) -> Result<Self, ScenarioError> {
        let online = online_init(offline, &cfg.ego.pose_at(0.0), cfg.window_size)?;
        Ok(Self {
            cfg,
            offline,
            online,
            next: 0,
        })
    }

    pub fn online(&self) -> &OnlineMap {
        &self.online
    }

    pub fn offline_map(&self) -> &OfflineMap {
        self.offline
    }

    /// Simulates and integrates the next sweep; `None` once the duration is over.
    pub fn step(&mut self) -> Result<Option<TickOutput>, ScenarioError> {
        if self.next >= self.cfg.tick_count() {
            return Ok(None);
        }
        let tick = self.next;
        let t = self.cfg.tick_time(tick);
        let pose = self.cfg.ego.pose_at(t);
        let sweep = simulate_sweep(&self.cfg.world, &pose, &self.cfg.sensor, t)?;
        let instant = self.online.step(self.offline, &sweep, &self.cfg.decay, &self.cfg.instant)?;
        self.next += 1;
        Ok(Some(TickOutput { tick, t, sweep, instant }))
    }

    pub fn into_online(self) -> OnlineMap {
        self.online
    }
}

/// Offline-grid raster of cells overlapping a static footprint.
#[derive(Debug, Clone)]
pub struct StaticTruth {
    geometry: GridGeometry,
    occupied: Vec<bool>,
}

fn cell_rect(g: &GridGeometry, col: i64, row: i64) -> Rect {
    let (ox, oy) = g.origin();
    let r = g.resolution();
    let (x0, y0) = (ox + col as f64 * r, oy + row as f64 * r);
    Rect {
        min_x: x0,
        min_y: y0,
        max_x: x0 + r,
        max_y: y0 + r,
    }
}

/// Cell coordinate range that can intersect `[lo, hi]` along one axis.
fn cell_span(origin: f64, res: f64, lo: f64, hi: f64, n: usize) -> std::ops::Range<i64> {
    let a = ((lo - origin) / res).floor() as i64 - 1;
    let b = ((hi - origin) / res).floor() as i64 + 2;
    a.max(0)..b.min(n as i64)
}

impl StaticTruth {
    pub fn new(cfg: &ScenarioConfig, geometry: GridGeometry) -> Self {
        let mut occupied = vec![false; geometry.len()];
        let (ox, oy) = geometry.origin();
        let r = geometry.resolution();
        for b in cfg.world.static_boxes() {
            let f = b.footprint;
            for row in cell_span(oy, r, f.min_y, f.max_y, geometry.height()) {
                for col in cell_span(ox, r, f.min_x, f.max_x, geometry.width()) {
                    if cell_rect(&geometry, col, row).overlaps(&f) {
                        occupied[row as usize * geometry.width() + col as usize] = true;
                    }
                }
            }
        }
        Self { geometry, occupied }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn is_occupied(&self, col: i64, row: i64) -> bool {
        self.geometry
            .checked(col, row)
            .is_some_and(|c| self.occupied[self.geometry.index(c)])
    }

    pub fn count(&self) -> usize {
        self.occupied.iter().filter(|&&o| o).count()
    }
}

/// Cells hit this tick and how many of them held above [`STATIC_HOLD_PROB`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct HoldCount {
    pub hit: usize,
    pub held: usize,
}

impl HoldCount {
    pub fn fraction(&self) -> f64 {
        if self.hit == 0 {
            1.0
        } else {
            self.held as f64 / self.hit as f64
        }
    }

    fn add(&mut self, held: bool) {
        self.hit += 1;
        self.held += held as usize;
    }
}

/// Static-obstacle cells that received occupied evidence in one tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StaticHold {
    /// Every hit cell overlapping a static footprint.
    pub footprint: HoldCount,
    /// The subset that the offline map also marks occupied.
    pub mapped: HoldCount,
}
/// Per-tick online values of the trace region.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceHistory {
    pub region: TraceRegion,
    /// Last tick at which each region cell received evidence (always occupied).
    pub last_observed: Vec<usize>,
    /// `values[tick][i]` is the online value of region cell `i` after `tick`.
    pub values: Vec<Vec<LogOdds>>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub name: String,
    pub metrics: RunMetrics,
    pub trace: TraceHistory,
    pub static_hold: Vec<StaticHold>,
    pub offline: OfflineMap,
    pub final_map: GridMap,
    /// Files written, in creation order.
    pub artifacts: Vec<PathBuf>,
    pub wall_ms: f64,
}

impl RunReport {
    pub fn summary_line(&self) -> String {
        let persistence = self
            .metrics
            .trace_persistence
            .map_or_else(|| "none".to_string(), |k| k.to_string());
        format!(
            "summary scenario={} ticks={} trace_cells={} peak_trace_dev={:.6} trace_persistence={} final_iou={:.6} wall_ms={:.1}",
            self.name,
            self.metrics.ticks.len(),
            self.trace.region.len(),
            self.metrics.peak_trace_dev,
            persistence,
            self.metrics.final_iou,
            self.wall_ms
        )
    }
}

/// Cells a moving object covers at some tick, free in the offline map and
/// clear of static footprints, in row-major order.
fn trace_candidates(cfg: &ScenarioConfig, offline: &OfflineMap, truth: &StaticTruth) -> Vec<(i64, i64)> {
    let g = *offline.geometry();
    let (ox, oy) = g.origin();
    let r = g.resolution();
    let mut swept = vec![false; g.len()];
    for tick in 0..cfg.tick_count() {
        let t = cfg.tick_time(tick);
        for obj in cfg.world.dynamic_objects() {
            let fp = obj.footprint_at(t);
            let bb = fp.bounding_rect();
            for row in cell_span(oy, r, bb.min_y, bb.max_y, g.height()) {
                for col in cell_span(ox, r, bb.min_x, bb.max_x, g.width()) {
                    let i = row as usize * g.width() + col as usize;
                    if !swept[i] && fp.overlaps_rect(&cell_rect(&g, col, row)) {
                        swept[i] = true;
                    }
                }
            }
        }
    }
    let grid = offline.grid();
    (0..g.len())
        .filter(|&i| swept[i] && grid.observed_flags()[i] && grid.values()[i] < 0.0)
        .map(|i| {
            let c = g.cell_at(i);
            (c.col as i64, c.row as i64)
        })
        .filter(|&(c, r)| !truth.is_occupied(c, r))
        .collect()
}

fn occupancy_overlap(online: &OnlineMap, truth: &StaticTruth) -> Overlap {
    let grid = online.grid();
    let (dc, dr) = online.offset();
    let w = grid.width();
    let mut o = Overlap::default();
    for (i, (&v, &seen)) in grid.values().iter().zip(grid.observed_flags()).enumerate() {
        if !seen {
            continue;
        }
        let occupied = v > 0.0;
        let truth_here = truth.is_occupied(dc + (i % w) as i64, dr + (i / w) as i64);
        if occupied || truth_here {
            o.union += 1;
            if occupied && truth_here {
                o.intersection += 1;
            }
        }
    }
    o
}

fn static_hold(online: &OnlineMap, instant: &InstantMap, truth: &StaticTruth, hold: LogOdds, occupied: LogOdds) -> StaticHold {
    let grid = online.grid();
    let (dc, dr) = online.offset();
    let w = grid.width();
    let mut h = StaticHold::default();
    for &i in instant.touched() {
        if instant.kind_at(i) == CellKind::OccupiedEvidence && truth.is_occupied(dc + (i % w) as i64, dr + (i / w) as i64) {
            let held = grid.values()[i] > hold;
            h.footprint.add(held);
            if online.offline_view().values()[i] > occupied {
                h.mapped.add(held);
            }
        }
    }
    h
}

/// Removes written files (and directories it created) unless disarmed.
struct OutputGuard {
    files: Vec<PathBuf>,
    dirs: Vec<PathBuf>,
    armed: bool,
}

impl OutputGuard {
    fn create_dir(&mut self, dir: &Path) -> Result<(), ScenarioError> {
        if !dir.exists() {
            let mut missing = Vec::new();
            let mut d = Some(dir);
            while let Some(p) = d.filter(|p| !p.as_os_str().is_empty() && !p.exists()) {
                missing.push(p.to_path_buf());
                d = p.parent();
            }
            fs::create_dir_all(dir).map_err(io_err(dir))?;
            self.dirs.extend(missing);
        }
        Ok(())
    }

    fn track(&mut self, path: PathBuf) -> PathBuf {
        self.files.push(path.clone());
        path
    }
}

impl Drop for OutputGuard {
    fn drop(&mut self) {
        if self.armed {
            for f in &self.files {
                let _ = fs::remove_file(f);
            }
            for d in &self.dirs {
                let _ = fs::remove_dir(d);
            }
        }
    }
}

/// Runs both phases and writes `offline.ogm`, `final.ogm`, `metrics.csv` and
/// `frames/frame_NNNNN.ppm` (every `render_stride` ticks) under the output
/// directory. On error, files written so far are removed.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunReport, ScenarioError> {
    let mut guard = OutputGuard {
        files: Vec::new(),
        dirs: Vec::new(),
        armed: true,
    };
    let report = run_inner(cfg, &mut guard)?;
    guard.armed = false;
    Ok(report)
}

fn run_inner(cfg: &ScenarioConfig, out: &mut OutputGuard) -> Result<RunReport, ScenarioError> {
    let started = Instant::now();
    let dir = cfg.output_dir.as_path();
    let frames_dir = dir.join("frames");
    let sweeps_dir = dir.join("sweeps");
    out.create_dir(&frames_dir)?;
    if cfg.dump_sweeps {
        out.create_dir(&sweeps_dir)?;
    }

    let offline = obtain_offline_map(cfg)?;
    let path = out.track(dir.join("offline.ogm"));
    save_map(offline.grid(), &path)?;

    let truth = StaticTruth::new(cfg, *offline.geometry());
    let candidates = trace_candidates(cfg, &offline, &truth);
    let hold_threshold = logodds_from_prob(STATIC_HOLD_PROB)?;
    let occupied_threshold = logodds_from_prob(cfg.clean.occ_threshold)?;

    let mut run = OnlineRun::new(cfg, &offline)?;
    let n = cfg.tick_count();
    let mut samples: Vec<Vec<LogOdds>> = Vec::with_capacity(n);
    let mut last_evidence: Vec<Option<(usize, CellKind)>> = vec![None; candidates.len()];
    let mut frames = Vec::with_capacity(n);
    let mut holds = Vec::with_capacity(n);

    loop {
        let tick_start = Instant::now();
        let Some(tick) = run.step()? else { break };
        let wall_ms = tick_start.elapsed().as_secs_f64() * 1e3;
        let online = run.online();

        let mut values = Vec::with_capacity(candidates.len());
        for (k, &(c, r)) in candidates.iter().enumerate() {
            match online.local_cell(c, r) {
                Some(local) => {
                    values.push(online.grid().get(local));
                    let kind = tick.instant.kind(local);
                    if kind != CellKind::Untouched {
                        last_evidence[k] = Some((tick.tick, kind));
                    }
                }
                // Outside the window the cell would be reloaded from offline.
                None => values.push(offline.value_at_coords(c, r).unwrap_or(0.0)),
            }
        }
        samples.push(values);
        holds.push(static_hold(online, &tick.instant, &truth, hold_threshold, occupied_threshold));
        frames.push(FrameSample {
            tick: tick.tick,
            t_sec: tick.t,
            trace_values: Vec::new(),
            observed_cells: online.grid().observed_count(),
            overlap: occupancy_overlap(online, &truth),
            wall_ms,
        });

        if tick.tick % cfg.render_stride == 0 {
            let p = out.track(frames_dir.join(format!("frame_{:05}.ppm", tick.tick)));
            render_frame(online.grid(), &p).map_err(io_err(&p))?;
        }
        if cfg.dump_sweeps {
            let p = out.track(sweeps_dir.join(format!("sweep_{:05}.txt", tick.tick)));
            let f = File::create(&p).map_err(io_err(&p))?;
            write_sweep_log(&tick.sweep, BufWriter::new(f)).map_err(io_err(&p))?;
        }
    }

    // Traces: cells whose most recent evidence is occupied, so they were never
    // cleared again, that were marked occupied (p > 0.5) by it, and which lay
    // in the blind spot around the sensor when that evidence arrived.
    let blind = cfg.sensor.blind_radius();
    let g = *offline.geometry();
    let keep: Vec<usize> = (0..candidates.len())
        .filter(|&k| match last_evidence[k] {
            Some((tick, CellKind::OccupiedEvidence)) if samples[tick][k] > 0.0 => {
                let ego = cfg.ego.pose_at(cfg.tick_time(tick));
                let (c, r) = candidates[k];
                let (x, y) = g.cell_center(CellIndex::new(c as usize, r as usize));
                (x - ego.x).hypot(y - ego.y) <= blind
            }
            _ => false,
        })
        .collect();
    let region = TraceRegion {
        cells: keep.iter().map(|&k| candidates[k]).collect(),
        offline: keep
            .iter()
            .map(|&k| offline.value_at_coords(candidates[k].0, candidates[k].1).unwrap_or(0.0))
            .collect(),
    };
    let values: Vec<Vec<LogOdds>> = samples.iter().map(|row| keep.iter().map(|&k| row[k]).collect()).collect();
    for (f, v) in frames.iter_mut().zip(&values) {
        f.trace_values = v.clone();
    }
    let metrics = metrics_for_region(&frames, &region, cfg.trace_epsilon)?;

    let final_map = run.into_online().grid().clone();
    let path = out.track(dir.join("final.ogm"));
    save_map(&final_map, &path)?;
    let path = out.track(dir.join("metrics.csv"));
    let f = File::create(&path).map_err(io_err(&path))?;
    write_metrics_csv(&metrics, BufWriter::new(f)).map_err(io_err(&path))?;

    Ok(RunReport {
        name: cfg.name.clone(),
        trace: TraceHistory {
            last_observed: keep.iter().filter_map(|&k| last_evidence[k].map(|(t, _)| t)).collect(),
            region,
            values,
        },
        metrics,
        static_hold: holds,
        offline,
        final_map,
        artifacts: out.files.clone(),
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::config::parse_config;

    fn small(dir: &Path, extra: &str) -> ScenarioConfig {
        let text = format!(
            r#"{{
                "name": "small",
                "world": {{
                    "bounds": {{ "min_x": -30, "min_y": -30, "max_x": 30, "max_y": 30 }},
                    "static_boxes": [ {{ "name": "wall", "min_x": 10.05, "min_y": -8.05, "max_x": 11.05, "max_y": 8.05, "top": 3 }} ]
                }},
                "ego": [ {{ "x": 0.1, "y": 0.1, "t": 0 }} ],
                "sensor": {{ "scans_per_revolution": 360 }},
                "duration": 0.5,
                "window_size": 40,
                "clean": {{ "min_component_cells": 1 }},
                "render_stride": 4,
                "output_dir": {:?}
                {extra}
            }}"#,
            dir.to_str().unwrap()
        );
        parse_config(&text).unwrap()
    }

    #[test]
    fn static_truth_marks_overlapping_cells() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small(dir.path(), "");
        let g = offline_geometry(&cfg).unwrap();
        let truth = StaticTruth::new(&cfg, g);
        // x in [10.05, 11.05] touches 6 columns, y in [-8.05, 8.05] touches 82 rows.
        assert_eq!(truth.count(), 6 * 82);
        let (c, r) = g.cell_coords(10.0, 0.0);
        assert!(truth.is_occupied(c, r));
        assert!(!truth.is_occupied(c - 1, r));
    }

    #[test]
    fn writes_expected_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("run");
        let cfg = small(&out, r#", "dump_sweeps": true"#);
        let report = run_scenario(&cfg).unwrap();
        assert_eq!(report.metrics.ticks.len(), 10);
        for name in ["offline.ogm", "final.ogm", "metrics.csv", "frames/frame_00000.ppm", "frames/frame_00008.ppm", "sweeps/sweep_00009.txt"] {
            assert!(out.join(name).is_file(), "{name}");
        }
        assert!(!out.join("frames/frame_00001.ppm").exists());
        assert!(report.trace.region.is_empty());
        assert!(report.summary_line().starts_with("summary scenario=small ticks=10 "));
        // Stationary, no moving objects: the online map agrees with the ground truth.
        assert!(report.static_hold.iter().all(|h| h.footprint.fraction() == 1.0 && h.mapped == h.footprint));
        assert!(report.metrics.final_iou > 0.99, "{}", report.metrics.final_iou);
    }

    #[test]
    fn failure_removes_partial_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("nested/run");
        let missing = dir.path().join("missing.ogm");
        let cfg = small(&out, &format!(r#", "offline_map": {:?}"#, missing.to_str().unwrap()));
        assert!(matches!(run_scenario(&cfg), Err(ScenarioError::MapIo(_))));
        assert!(!dir.path().join("nested").exists());
    }

    #[test]
    fn mapping_poses_follow_the_offline_trajectory() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small(dir.path(), r#", "offline_ego": [ { "x": -10, "y": 0, "t": 0 }, { "x": 10, "y": 0, "t": 2 } ]"#);
        let poses = mapping_poses(&cfg);
        assert_eq!(poses.len(), 41);
        assert_eq!((poses[20].x, poses[40].x), (0.0, 10.0));
        let default = small(dir.path(), "");
        assert_eq!(mapping_poses(&default).len(), default.tick_count());
    }
}
