//! Offline map construction and the online map lifecycle.
//!
//! The offline map integrates every logged sweep into one grid over the whole
//! scenario and is then cleaned of small occupied blobs. The online map is a
//! square window around the vehicle. Its cells start from the offline values,
//! and on each sweep it is recentered, decayed toward the offline map, and
//! then updated with the new instantaneous map.

use std::collections::VecDeque;

use serde::Deserialize;
use thiserror::Error;

use crate::grid::{apply_decay, logodds_from_prob, CellIndex, DecayParams, GridError, GridGeometry, GridMap, LogOdds, L_FREE};
use crate::instant::{apply_instant, build_instant_map, InstantConfig, InstantMap};
use crate::world::{Pose, Sweep};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FusionError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("sensor log error: {0}")]
    Log(String),
    #[error("scenario error: {0}")]
    Scenario(String),
}

/// Map of the whole environment built before runtime. Read-only once built.
#[derive(Debug, Clone, PartialEq)]
pub struct OfflineMap(GridMap);

impl OfflineMap {
    pub fn from_grid(grid: GridMap) -> Self {
        Self(grid)
    }

    pub fn grid(&self) -> &GridMap {
        &self.0
    }

    pub fn into_grid(self) -> GridMap {
        self.0
    }

    pub fn geometry(&self) -> &GridGeometry {
        self.0.geometry()
    }

    /// Value at unbounded offline coordinates; `None` outside the map.
    pub fn value_at_coords(&self, col: i64, row: i64) -> Option<LogOdds> {
        self.geometry().checked(col, row).map(|c| self.0.get(c))
    }
}

/// One logged sweep and the ground-truth pose it was taken from.
#[derive(Debug, Clone)]
pub struct LogEntry {
    pub pose: Pose,
    pub sweep: Sweep,
}

/// Incremental offline map construction, one sweep at a time.
#[derive(Debug)]
pub struct OfflineBuilder {
    map: GridMap,
    cfg: InstantConfig,
    last_t: Option<f64>,
}

impl OfflineBuilder {
    pub fn new(geometry: GridGeometry, cfg: InstantConfig) -> Self {
        Self {
            map: GridMap::new(geometry),
            cfg,
            last_t: None,
        }
    }

    pub fn add(&mut self, pose: &Pose, sweep: &Sweep) -> Result<(), FusionError> {
        let aligned = pose.t == sweep.t && pose.x == sweep.ego_pose.x && pose.y == sweep.ego_pose.y;
        if !aligned {
            return Err(FusionError::Log(format!(
                "pose at t={} ({}, {}) does not match sweep at t={} ({}, {})",
                pose.t, pose.x, pose.y, sweep.t, sweep.ego_pose.x, sweep.ego_pose.y
            )));
        }
        if self.last_t.is_some_and(|t| sweep.t < t) {
            return Err(FusionError::Log(format!("sweep at t={} is out of order", sweep.t)));
        }
        self.last_t = Some(sweep.t);
        let inst = build_instant_map(sweep, self.map.geometry(), &self.cfg)?;
        apply_instant(&mut self.map, &inst, &self.cfg.bounds)?;
        Ok(())
    }

    pub fn finish(self) -> OfflineMap {
        OfflineMap(self.map)
    }
}

/// Integrates the log in order into a fresh map over `geometry`.
pub fn build_offline<'a>(
    log: impl IntoIterator<Item = &'a LogEntry>,
    geometry: GridGeometry,
    cfg: &InstantConfig,
) -> Result<OfflineMap, FusionError> {
    let mut builder = OfflineBuilder::new(geometry, *cfg);
    for entry in log {
        builder.add(&entry.pose, &entry.sweep)?;
    }
    Ok(builder.finish())
}

/// Automated clean-up of the offline map: small occupied blobs are freed.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CleanParams {
    /// Cells with occupancy probability above this are occupied.
    pub occ_threshold: f64,
    /// 8-connected occupied components with fewer cells are removed.
    pub min_component_cells: usize,
    /// Value written into removed cells.
    pub free_value: LogOdds,
}

impl Default for CleanParams {
    fn default() -> Self {
        Self {
            occ_threshold: 0.5,
            min_component_cells: 6,
            free_value: L_FREE,
        }
    }
}

impl CleanParams {
    pub fn validate(&self) -> Result<(), GridError> {
        logodds_from_prob(self.occ_threshold)?;
        if self.min_component_cells == 0 {
            return Err(GridError::Geometry("min_component_cells must be at least 1".into()));
        }
        if !self.free_value.is_finite() {
            return Err(GridError::Geometry("clean free_value must be finite".into()));
        }
        Ok(())
    }
}

pub fn clean_offline(map: OfflineMap, params: &CleanParams) -> Result<OfflineMap, FusionError> {
    params.validate()?;
    let threshold = logodds_from_prob(params.occ_threshold)?;
    let mut grid = map.0;
    let g = *grid.geometry();
    let (w, h) = (g.width() as i64, g.height() as i64);
    let occupied: Vec<bool> = grid.values().iter().map(|&v| v > threshold).collect();
    let mut seen = vec![false; g.len()];
    let mut queue = VecDeque::new();
    let mut component = Vec::new();

    for start in 0..g.len() {
        if !occupied[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        component.clear();
        while let Some(i) = queue.pop_front() {
            component.push(i);
            let (c, r) = ((i % g.width()) as i64, (i / g.width()) as i64);
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let (nc, nr) = (c + dc, r + dr);
                    if (dc, dr) == (0, 0) || nc < 0 || nr < 0 || nc >= w || nr >= h {
                        continue;
                    }
                    let j = (nr * w + nc) as usize;
                    if occupied[j] && !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        if component.len() < params.min_component_cells {
            for &i in &component {
                grid.set(g.cell_at(i), params.free_value);
            }
        }
    }
    Ok(OfflineMap(grid))
}

/// Square window of the online map around the vehicle.
///
/// Window cells coincide with offline cells: `offset` is the offline cell
/// coordinate of window cell `(0, 0)`. `offline_view` holds the offline values
/// under the window (`0.0` where the window leaves the offline extent).
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineMap {
    map: GridMap,
    offline_view: GridMap,
    offset: (i64, i64),
}

fn window_offset(offline: &OfflineMap, ego: &Pose, cells: (usize, usize)) -> (i64, i64) {
    let (c, r) = offline.geometry().cell_coords(ego.x, ego.y);
    (c - (cells.0 / 2) as i64, r - (cells.1 / 2) as i64)
}

fn window_geometry(offline: &OfflineMap, offset: (i64, i64), cells: (usize, usize)) -> Result<GridGeometry, GridError> {
    let g = offline.geometry();
    let (ox, oy) = g.origin();
    GridGeometry::new(
        g.resolution(),
        ox + offset.0 as f64 * g.resolution(),
        oy + offset.1 as f64 * g.resolution(),
        cells.0,
        cells.1,
    )
}

/// Online map window of `window_size` meters centered (to the cell) on `ego`.
pub fn online_init(offline: &OfflineMap, ego: &Pose, window_size: f64) -> Result<OnlineMap, FusionError> {
    if offline.geometry().cell_of(ego.x, ego.y).is_none() {
        return Err(FusionError::Scenario(format!(
            "ego pose ({}, {}) lies outside the offline map",
            ego.x, ego.y
        )));
    }
    let n = (window_size / offline.geometry().resolution()).round();
    if !(n >= 1.0 && n.is_finite()) {
        return Err(FusionError::Scenario(format!("window size {window_size} is smaller than one cell")));
    }
    let cells = (n as usize, n as usize);
    let offset = window_offset(offline, ego, cells);
    let geometry = window_geometry(offline, offset, cells)?;
    let mut view = GridMap::new(geometry);
    for row in 0..cells.1 {
        for col in 0..cells.0 {
            if let Some(v) = offline.value_at_coords(offset.0 + col as i64, offset.1 + row as i64) {
                view.set(CellIndex::new(col, row), v);
            }
        }
    }
    Ok(OnlineMap {
        map: view.clone(),
        offline_view: view,
        offset,
    })
}

impl OnlineMap {
    pub fn grid(&self) -> &GridMap {
        &self.map
    }

    pub fn offline_view(&self) -> &GridMap {
        &self.offline_view
    }

    /// Offline cell coordinates of window cell `(0, 0)`.
    pub fn offset(&self) -> (i64, i64) {
        self.offset
    }

    pub fn geometry(&self) -> &GridGeometry {
        self.map.geometry()
    }

    /// Window cell for unbounded offline coordinates, if inside the window.
    pub fn local_cell(&self, col: i64, row: i64) -> Option<CellIndex> {
        self.geometry().checked(col - self.offset.0, row - self.offset.1)
    }

    /// Moves the window so it is centered on `ego`. Cells that stay inside keep
    /// their values and flags; entering cells are loaded from the offline map.
    /// Returns the shift in cells.
    pub fn recenter(&mut self, offline: &OfflineMap, ego: &Pose) -> Result<(i64, i64), FusionError> {
        let cells = (self.map.width(), self.map.height());
        let new_offset = window_offset(offline, ego, cells);
        let shift = (new_offset.0 - self.offset.0, new_offset.1 - self.offset.1);
        if shift == (0, 0) {
            return Ok(shift);
        }
        let geometry = window_geometry(offline, new_offset, cells)?;
        let mut map = GridMap::new(geometry);
        let mut view = GridMap::new(geometry);
        let old = self.map.geometry();
        for row in 0..cells.1 {
            for col in 0..cells.0 {
                let here = CellIndex::new(col, row);
                let i = geometry.index(here);
                match old.checked(col as i64 + shift.0, row as i64 + shift.1) {
                    Some(prev) => {
                        let j = old.index(prev);
                        map.store_at(i, self.map.value_at(j), self.map.observed_flags()[j]);
                        view.store_at(i, self.offline_view.value_at(j), false);
                    }
                    None => {
                        let off = offline
                            .value_at_coords(new_offset.0 + col as i64, new_offset.1 + row as i64)
                            .unwrap_or(0.0);
                        map.store_at(i, off, false);
                        view.store_at(i, off, false);
                    }
                }
            }
        }
        self.map = map;
        self.offline_view = view;
        self.offset = new_offset;
        Ok(shift)
    }

    /// One mapping cycle; see [`online_step`].
    pub fn step(
        &mut self,
        offline: &OfflineMap,
        sweep: &Sweep,
        decay: &DecayParams,
        cfg: &InstantConfig,
    ) -> Result<InstantMap, FusionError> {
        self.recenter(offline, &sweep.ego_pose)?;
        apply_decay(&mut self.map, &self.offline_view, decay)?;
        let inst = build_instant_map(sweep, self.map.geometry(), cfg)?;
        apply_instant(&mut self.map, &inst, &cfg.bounds)?;
        Ok(inst)
    }
}

/// Recenter on the sweep pose, decay once toward the offline map, then
/// integrate the sweep. Returns the instantaneous map that was applied.
pub fn online_step(
    online: &mut OnlineMap,
    offline: &OfflineMap,
    sweep: &Sweep,
    decay: &DecayParams,
    cfg: &InstantConfig,
) -> Result<InstantMap, FusionError> {
    online.step(offline, sweep, decay, cfg)
}
