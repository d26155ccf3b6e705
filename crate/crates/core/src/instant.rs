//! Instantaneous occupancy grid built from a single sweep.
//!
//! Each vertical scan is processed independently:
//!
//! 1. beams whose return lies between [`InstantConfig::obstacle_min_height`]
//!    and [`InstantConfig::obstacle_max_height`] above the ground are obstacles;
//! 2. obstacle hit points are projected to 2D and their cells receive
//!    occupied evidence;
//! 3. cells on the grid line from the first beam's projection to the first
//!    obstacle's projection are set free. A scan without obstacles is freed up
//!    to its farthest ground return.
//!
//! A cell that is both freed by one scan and hit by another in the same sweep
//! keeps the occupied evidence.

use serde::Deserialize;

use crate::grid::{CellIndex, GridError, GridGeometry, GridMap, LogOdds, LogOddsBounds, L_FREE, L_OCC};
use crate::world::{Sweep, VerticalScan};

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InstantConfig {
    /// Minimum height above ground, meters, for a return to count as an obstacle.
    pub obstacle_min_height: f64,
    /// Returns at or above this height are overhangs, not obstacles.
    pub obstacle_max_height: f64,
    /// Log-odds added to a cell holding an obstacle return.
    pub occupied_evidence: LogOdds,
    /// Log-odds written into cells cleared by a raycast.
    pub free_value: LogOdds,
    pub bounds: LogOddsBounds,
}

impl Default for InstantConfig {
    fn default() -> Self {
        Self {
            obstacle_min_height: 0.30,
            obstacle_max_height: 4.0,
            occupied_evidence: L_OCC,
            free_value: L_FREE,
            bounds: LogOddsBounds::default(),
        }
    }
}

impl InstantConfig {
    pub fn validate(&self) -> Result<(), GridError> {
        LogOddsBounds::new(self.bounds.min, self.bounds.max)?;
        let finite = [
            self.obstacle_min_height,
            self.obstacle_max_height,
            self.occupied_evidence,
            self.free_value,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite || !(self.obstacle_max_height > self.obstacle_min_height) {
            return Err(GridError::Geometry("invalid obstacle height thresholds or evidence values".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObstacleClassification {
    pub is_obstacle: Vec<bool>,
    /// Smallest beam index flagged as an obstacle.
    pub first_obstacle: Option<usize>,
}

pub fn classify_scan(scan: &VerticalScan, ground_z: f64, cfg: &InstantConfig) -> ObstacleClassification {
    let is_obstacle: Vec<bool> = scan
        .returns
        .iter()
        .map(|r| match r {
            Some(h) => {
                let dz = h.point[2] - ground_z;
                dz > cfg.obstacle_min_height && dz < cfg.obstacle_max_height
            }
            None => false,
        })
        .collect();
    let first_obstacle = is_obstacle.iter().position(|&o| o);
    ObstacleClassification {
        is_obstacle,
        first_obstacle,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum CellKind {
    Untouched = 0,
    FreeSet,
    OccupiedEvidence,
}

/// Evidence produced by one sweep. Untouched cells carry `0.0`, free cells
/// the configured free value, occupied cells the occupied evidence.
#[derive(Debug, Clone, PartialEq)]
pub struct InstantMap {
    geometry: GridGeometry,
    kinds: Vec<CellKind>,
    touched: Vec<usize>,
    occupied_evidence: LogOdds,
    free_value: LogOdds,
}

impl InstantMap {
    pub fn new(geometry: GridGeometry, cfg: &InstantConfig) -> Self {
        Self {
            geometry,
            kinds: vec![CellKind::Untouched; geometry.len()],
            touched: Vec::new(),
            occupied_evidence: cfg.occupied_evidence,
            free_value: cfg.free_value,
        }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn kind(&self, cell: CellIndex) -> CellKind {
        self.kinds[self.geometry.index(cell)]
    }

    #[inline]
    pub fn kind_at(&self, index: usize) -> CellKind {
        self.kinds[index]
    }

    pub fn value(&self, cell: CellIndex) -> LogOdds {
        match self.kind(cell) {
            CellKind::Untouched => 0.0,
            CellKind::FreeSet => self.free_value,
            CellKind::OccupiedEvidence => self.occupied_evidence,
        }
    }

    /// Linear indices of touched cells in first-touch order.
    pub fn touched(&self) -> &[usize] {
        &self.touched
    }

    pub fn cells_of_kind(&self, kind: CellKind) -> impl Iterator<Item = CellIndex> + '_ {
        self.touched
            .iter()
            .filter(move |&&i| self.kinds[i] == kind)
            .map(|&i| self.geometry.cell_at(i))
    }

    pub fn count(&self, kind: CellKind) -> usize {
        match kind {
            CellKind::Untouched => self.kinds.len() - self.touched.len(),
            _ => self.cells_of_kind(kind).count(),
        }
    }

    fn mark_free(&mut self, index: usize) {
        if self.kinds[index] == CellKind::Untouched {
            self.kinds[index] = CellKind::FreeSet;
            self.touched.push(index);
        }
    }

    fn mark_occupied(&mut self, index: usize) {
        match self.kinds[index] {
            CellKind::Untouched => {
                self.kinds[index] = CellKind::OccupiedEvidence;
                self.touched.push(index);
            }
            CellKind::FreeSet => self.kinds[index] = CellKind::OccupiedEvidence,
            CellKind::OccupiedEvidence => {}
        }
    }
}

/// Integer grid line from `from` toward `to`, inclusive of `from`, exclusive of `to`.
fn line_cells(from: (i64, i64), to: (i64, i64), mut visit: impl FnMut(i64, i64)) {
    let (mut x, mut y) = from;
    let dx = (to.0 - x).abs();
    let dy = -(to.1 - y).abs();
    let sx = if to.0 > x { 1 } else { -1 };
    let sy = if to.1 > y { 1 } else { -1 };
    let mut err = dx + dy;
    while (x, y) != to {
        visit(x, y);
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

/// Bresenham traversal from `from` to `to`, including `from` and excluding `to`.
pub fn raycast_cells(from: CellIndex, to: CellIndex, geometry: &GridGeometry) -> Result<Vec<CellIndex>, GridError> {
    for c in [from, to] {
        if !geometry.contains(c) {
            return Err(GridError::OutOfBounds {
                col: c.col as i64,
                row: c.row as i64,
                width: geometry.width(),
                height: geometry.height(),
            });
        }
    }
    let mut cells = Vec::new();
    line_cells(
        (from.col as i64, from.row as i64),
        (to.col as i64, to.row as i64),
        |c, r| cells.push(CellIndex::new(c as usize, r as usize)),
    );
    Ok(cells)
}

/// Projects one sweep into an instantaneous map over `geometry`.
/// Cells outside the grid are dropped.
pub fn build_instant_map(sweep: &Sweep, geometry: &GridGeometry, cfg: &InstantConfig) -> Result<InstantMap, GridError> {
    if geometry.cell_of(sweep.origin[0], sweep.origin[1]).is_none() {
        return Err(GridError::Misaligned(format!(
            "sensor origin ({}, {}) lies outside the map extent",
            sweep.origin[0], sweep.origin[1]
        )));
    }
    let mut inst = InstantMap::new(*geometry, cfg);
    let project = |p: [f64; 3]| geometry.cell_coords(p[0], p[1]);

    for scan in &sweep.scans {
        let cls = classify_scan(scan, sweep.ground_z, cfg);

        for (hit, _) in scan.returns.iter().zip(&cls.is_obstacle).filter(|(_, &o)| o) {
            let (c, r) = project(hit.expect("obstacle beams return").point);
            if let Some(cell) = geometry.checked(c, r) {
                inst.mark_occupied(geometry.index(cell));
            }
        }

        let Some(start_beam) = scan.returns.iter().position(Option::is_some) else {
            continue;
        };
        let start = project(scan.returns[start_beam].unwrap().point);
        let (end, include_end) = match cls.first_obstacle {
            Some(f) if f == start_beam => continue,
            Some(f) => (project(scan.returns[f].unwrap().point), false),
            None => {
                let origin = (sweep.origin[0], sweep.origin[1]);
                let farthest = scan
                    .returns
                    .iter()
                    .flatten()
                    .filter(|h| h.point[2] - sweep.ground_z <= cfg.obstacle_min_height)
                    .map(|h| ((h.point[0] - origin.0).hypot(h.point[1] - origin.1), h.point))
                    .fold(None, |best: Option<(f64, [f64; 3])>, cur| match best {
                        Some(b) if b.0 >= cur.0 => Some(b),
                        _ => Some(cur),
                    });
                match farthest {
                    Some((_, p)) => (project(p), true),
                    None => continue,
                }
            }
        };

        let mut free = |c: i64, r: i64| {
            if let Some(cell) = geometry.checked(c, r) {
                inst.mark_free(geometry.index(cell));
            }
        };
        line_cells(start, end, &mut free);
        if include_end {
            free(end.0, end.1);
        }
    }
    Ok(inst)
}

/// Adds occupied evidence (clamped) and overwrites freed cells in `target`,
/// marking both observed.
pub fn apply_instant(target: &mut GridMap, inst: &InstantMap, bounds: &LogOddsBounds) -> Result<(), GridError> {
    target.geometry().check_aligned(&inst.geometry)?;
    for &i in &inst.touched {
        match inst.kinds[i] {
            CellKind::OccupiedEvidence => {
                let v = bounds.clamp(target.value_at(i) + inst.occupied_evidence);
                target.store_at(i, v, true);
            }
            CellKind::FreeSet => target.store_at(i, inst.free_value, true),
            CellKind::Untouched => {}
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::L_MAX;
    use crate::world::{simulate_sweep, Hit, Pose, Rect, SensorConfig, StaticBox, World};
    use std::collections::HashSet;
    use std::f64::consts::TAU;

    fn grid16() -> GridGeometry {
        GridGeometry::new(1.0, 0.0, 0.0, 16, 16).unwrap()
    }

    fn map_geometry() -> GridGeometry {
        GridGeometry::covering(0.2, -80.0, -80.0, 80.0, 80.0).unwrap()
    }

    fn world_bounds() -> Rect {
        Rect::new(-100.0, -100.0, 100.0, 100.0).unwrap()
    }

    fn wall_world() -> World {
        let wall = StaticBox {
            name: "wall".into(),
            footprint: Rect::new(10.05, -20.05, 11.05, 20.05).unwrap(),
            top: 3.0,
        };
        World::new(0.0, world_bounds(), vec![wall], vec![]).unwrap()
    }

    fn scan_with_heights(heights: &[Option<f64>]) -> VerticalScan {
        VerticalScan {
            azimuth: 0.0,
            returns: heights
                .iter()
                .enumerate()
                .map(|(i, h)| {
                    h.map(|z| Hit {
                        range: 1.0 + i as f64,
                        point: [1.0 + i as f64, 0.0, z],
                    })
                })
                .collect(),
        }
    }

    #[test]
    fn raycast_examples() {
        let g = grid16();
        let c = CellIndex::new;
        assert_eq!(
            raycast_cells(c(0, 0), c(5, 0), &g).unwrap(),
            vec![c(0, 0), c(1, 0), c(2, 0), c(3, 0), c(4, 0)]
        );
        assert!(raycast_cells(c(3, 3), c(3, 3), &g).unwrap().is_empty());
        assert_eq!(raycast_cells(c(0, 0), c(0, 4), &g).unwrap(), vec![c(0, 0), c(0, 1), c(0, 2), c(0, 3)]);
        assert_eq!(raycast_cells(c(5, 5), c(2, 2), &g).unwrap(), vec![c(5, 5), c(4, 4), c(3, 3)]);
        assert!(matches!(raycast_cells(c(0, 0), c(16, 3), &g), Err(GridError::OutOfBounds { .. })));
    }

    #[test]
    fn classify_examples() {
        let cfg = InstantConfig::default();
        let ground = scan_with_heights(&[Some(0.0), Some(0.01), Some(-0.01)]);
        assert_eq!(classify_scan(&ground, 0.0, &cfg).first_obstacle, None);

        let mixed = scan_with_heights(&[Some(0.1), None, Some(0.5), Some(5.0), Some(1.0)]);
        let cls = classify_scan(&mixed, 0.0, &cfg);
        assert_eq!(cls.is_obstacle, vec![false, false, true, false, true]);
        assert_eq!(cls.first_obstacle, Some(2));

        let none = scan_with_heights(&[None, None]);
        assert_eq!(classify_scan(&none, 0.0, &cfg).is_obstacle, vec![false, false]);
        // Raised ground shifts the thresholds.
        assert_eq!(classify_scan(&mixed, 0.4, &cfg).first_obstacle, Some(4));
    }

    #[test]
    fn wall_beams_above_threshold_are_obstacles() {
        let cfg = InstantConfig::default();
        let sweep = simulate_sweep(&wall_world(), &Pose::new(0.0, 0.0, 0.0, 0.0), &SensorConfig::default(), 0.0).unwrap();
        let scan = &sweep.scans[0];
        let cls = classify_scan(scan, 0.0, &cfg);
        for (j, h) in scan.returns.iter().enumerate() {
            let expect = h.is_some_and(|h| h.point[2] > 0.30 && h.point[2] < 4.0);
            assert_eq!(cls.is_obstacle[j], expect, "beam {j}");
            if expect {
                let h = h.unwrap();
                assert!((h.point[0] - 10.05).abs() < 1e-9);
            }
        }
        // Beam elevations where the wall face (2 m below to 1 m above the sensor) is in reach.
        assert!(cls.is_obstacle.iter().filter(|&&o| o).count() >= 10);
    }

    #[test]
    fn empty_world_is_all_free() {
        let g = map_geometry();
        let sweep = simulate_sweep(&World::empty(world_bounds()), &Pose::new(0.0, 0.0, 0.0, 0.0), &SensorConfig::default(), 0.0).unwrap();
        let inst = build_instant_map(&sweep, &g, &InstantConfig::default()).unwrap();
        assert_eq!(inst.count(CellKind::OccupiedEvidence), 0);
        assert!(inst.count(CellKind::FreeSet) > 1000);
        // The blind disc around the sensor stays untouched.
        let sensor = g.cell_of(0.0, 0.0).unwrap();
        assert_eq!(inst.kind(sensor), CellKind::Untouched);
    }

    #[test]
    fn wall_makes_corridor_ending_at_footprint() {
        let g = map_geometry();
        let cfg = InstantConfig::default();
        let sweep = simulate_sweep(&wall_world(), &Pose::new(0.0, 0.0, 0.0, 0.0), &SensorConfig::default(), 0.0).unwrap();
        let inst = build_instant_map(&sweep, &g, &cfg).unwrap();
        // Straight ahead along +x: free from the blind radius up to the wall face.
        let blind = SensorConfig::default().blind_radius();
        let row = g.cell_of(0.0, 0.1).unwrap().row;
        let wall_col = g.cell_of(10.1, 0.1).unwrap().col;
        let first_free = g.cell_of(blind, 0.1).unwrap().col;
        assert_eq!(inst.kind(CellIndex::new(wall_col, row)), CellKind::OccupiedEvidence);
        for col in first_free + 1..wall_col {
            assert_eq!(inst.kind(CellIndex::new(col, row)), CellKind::FreeSet, "col {col}");
        }
        // Every occupied cell lies on the wall footprint.
        let footprint = Rect::new(10.05, -20.05, 11.05, 20.05).unwrap();
        for cell in inst.cells_of_kind(CellKind::OccupiedEvidence) {
            let (x, y) = g.cell_center(cell);
            let r = 0.2;
            let cell_rect = Rect::new(x - r / 2.0, y - r / 2.0, x + r / 2.0, y + r / 2.0).unwrap();
            assert!(cell_rect.overlaps(&footprint), "{cell:?}");
        }
        // Nothing beyond the wall along the corridor.
        assert_eq!(inst.kind(CellIndex::new(wall_col + 10, row)), CellKind::Untouched);
    }

    #[test]
    fn obstacle_in_first_beam_frees_nothing() {
        let g = map_geometry();
        let post = StaticBox {
            name: "post".into(),
            footprint: Rect::new(0.5, -0.5, 1.5, 0.5).unwrap(),
            top: 3.0,
        };
        let world = World::new(0.0, world_bounds(), vec![post], vec![]).unwrap();
        let cfg = SensorConfig {
            horizontal_step: TAU / 4.0,
            ..SensorConfig::default()
        };
        let sweep = simulate_sweep(&world, &Pose::new(0.0, 0.0, 0.0, 0.0), &cfg, 0.0).unwrap();
        let cls = classify_scan(&sweep.scans[0], 0.0, &InstantConfig::default());
        assert_eq!(cls.first_obstacle, Some(0));
        let single = Sweep {
            scans: vec![sweep.scans[0].clone()],
            ..sweep
        };
        let inst = build_instant_map(&single, &g, &InstantConfig::default()).unwrap();
        assert_eq!(inst.count(CellKind::FreeSet), 0);
        assert!(inst.count(CellKind::OccupiedEvidence) > 0);
    }

    #[test]
    fn marks_nothing_beyond_max_range() {
        let g = map_geometry();
        let sweep = simulate_sweep(&wall_world(), &Pose::new(-3.0, 2.0, 0.0, 0.0), &SensorConfig::default(), 0.0).unwrap();
        let inst = build_instant_map(&sweep, &g, &InstantConfig::default()).unwrap();
        let limit = 70.0 + 0.2 * std::f64::consts::SQRT_2;
        for &i in inst.touched() {
            let (x, y) = g.cell_center(g.cell_at(i));
            assert!((x + 3.0).hypot(y - 2.0) <= limit);
        }
        let again = build_instant_map(&sweep, &g, &InstantConfig::default()).unwrap();
        assert_eq!(inst, again);
    }

    #[test]
    fn rejects_extent_without_sensor() {
        let g = GridGeometry::new(0.2, 10.0, 10.0, 10, 10).unwrap();
        let sweep = simulate_sweep(&World::empty(world_bounds()), &Pose::new(0.0, 0.0, 0.0, 0.0), &SensorConfig::default(), 0.0).unwrap();
        assert!(matches!(
            build_instant_map(&sweep, &g, &InstantConfig::default()),
            Err(GridError::Misaligned(_))
        ));
    }

    #[test]
    fn apply_examples() {
        let g = GridGeometry::new(1.0, 0.0, 0.0, 3, 1).unwrap();
        let cfg = InstantConfig::default();
        let bounds = LogOddsBounds::default();
        let mut target = GridMap::new(g);
        let untouched = InstantMap::new(g, &cfg);
        apply_instant(&mut target, &untouched, &bounds).unwrap();
        assert_eq!(target, GridMap::new(g));

        let mut inst = InstantMap::new(g, &cfg);
        inst.mark_occupied(0);
        inst.mark_free(1);
        inst.mark_free(0);
        assert_eq!(inst.value(CellIndex::new(0, 0)), cfg.occupied_evidence);
        target.set(CellIndex::new(1, 0), L_MAX);
        apply_instant(&mut target, &inst, &bounds).unwrap();
        assert_eq!(target.get(CellIndex::new(0, 0)), cfg.occupied_evidence);
        assert!(target.is_observed(CellIndex::new(0, 0)));
        assert_eq!(target.get(CellIndex::new(1, 0)), cfg.free_value);
        assert!(target.is_observed(CellIndex::new(1, 0)));
        assert!(!target.is_observed(CellIndex::new(2, 0)));

        let other = GridMap::new(GridGeometry::new(1.0, 0.0, 0.0, 4, 1).unwrap());
        assert!(apply_instant(&mut other.clone(), &inst, &bounds).is_err());
    }

    #[test]
    fn occupied_wins_regardless_of_order() {
        let g = GridGeometry::new(1.0, 0.0, 0.0, 2, 1).unwrap();
        let cfg = InstantConfig::default();
        let mut a = InstantMap::new(g, &cfg);
        a.mark_free(0);
        a.mark_occupied(0);
        let mut b = InstantMap::new(g, &cfg);
        b.mark_occupied(0);
        b.mark_free(0);
        assert_eq!(a.kind_at(0), CellKind::OccupiedEvidence);
        assert_eq!(b.kind_at(0), CellKind::OccupiedEvidence);
    }

    /// Cells whose closed square, widened by `pad`, contains some sample of the
    /// segment between the two cell centers.
    fn sampled_cover(from: CellIndex, to: CellIndex, step: f64, pad: f64) -> HashSet<(i64, i64)> {
        let (x0, y0) = (from.col as f64 + 0.5, from.row as f64 + 0.5);
        let (x1, y1) = (to.col as f64 + 0.5, to.row as f64 + 0.5);
        let len = (x1 - x0).hypot(y1 - y0);
        let n = (len / step).ceil().max(1.0) as usize;
        let mut set = HashSet::new();
        for i in 0..=n {
            let s = i as f64 / n as f64;
            let (x, y) = (x0 + (x1 - x0) * s, y0 + (y1 - y0) * s);
            for c in ((x - pad).floor() as i64)..=((x + pad).floor() as i64) {
                for r in ((y - pad).floor() as i64)..=((y + pad).floor() as i64) {
                    set.insert((c, r));
                }
            }
        }
        set
    }

    #[test]
    fn raycast_is_inside_sampled_cover_on_small_grid() {
        let g = GridGeometry::new(1.0, 0.0, 0.0, 8, 8).unwrap();
        for a in 0..64 {
            for b in 0..64 {
                let (from, to) = (g.cell_at(a), g.cell_at(b));
                let cells = raycast_cells(from, to, &g).unwrap();
                let cover = sampled_cover(from, to, 0.01, 0.01);
                for c in &cells {
                    assert!(cover.contains(&(c.col as i64, c.row as i64)), "{from:?}->{to:?}: {c:?}");
                }
            }
        }
    }
}
