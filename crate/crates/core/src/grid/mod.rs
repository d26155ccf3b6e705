//! Occupancy grid storage, log-odds arithmetic and the map decay rule.
//!
//! Cells store log-odds `ln(p / (1 - p))`. Evidence is combined by addition and
//! clamped to [`LogOddsBounds`]. Every cell also carries an explicit `observed`
//! flag: a value of `0.0` is not treated as "unknown", since decay can pass a
//! cell through zero.
//!
//! Decay pulls an online cell toward its offline counterpart with the weighted
//! average `(on * w_on + off * w_off) / (w_on + w_off)`, applied on the stored
//! log-odds. Iterating it `k` times has the closed form
//! `off + (on - off) * a^k` with the retention factor `a = w_on / (w_on + w_off)`.

mod io;

pub use io::{load_map, read_map, save_map, write_map, MapIoError, MAP_MAGIC, MAP_VERSION};

use serde::Deserialize;
use thiserror::Error;

/// Log-odds occupancy value.
pub type LogOdds = f64;

/// Default lower clamp bound for stored log-odds.
pub const L_MIN: LogOdds = -10.0;
/// Default upper clamp bound for stored log-odds.
pub const L_MAX: LogOdds = 10.0;
/// Evidence of one obstacle return, `logodds(0.9) = ln 9`.
pub const L_OCC: LogOdds = 2.197_224_577_336_219_6;
/// Value of a cell cleared by a raycast, `logodds(0.1)`. Defined as the exact
/// negation of [`L_OCC`] so that one hit on a cleared cell lands on 0.0.
pub const L_FREE: LogOdds = -L_OCC;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("probability {0} is outside the open interval (0, 1)")]
    ProbabilityDomain(f64),
    #[error("log-odds value {0} is not finite")]
    NonFinite(f64),
    #[error("invalid decay weights w_on={w_on}, w_off={w_off}: both must be nonnegative with a positive sum")]
    DecayWeights { w_on: f64, w_off: f64 },
    #[error("maps are not aligned: {0}")]
    Misaligned(String),
    #[error("cell ({col}, {row}) is outside the {width}x{height} grid")]
    OutOfBounds {
        col: i64,
        row: i64,
        width: usize,
        height: usize,
    },
    #[error("invalid grid geometry: {0}")]
    Geometry(String),
}

/// `ln(p / (1 - p))`, unclamped.
pub fn logodds_from_prob(p: f64) -> Result<LogOdds, GridError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(GridError::ProbabilityDomain(p));
    }
    Ok((p / (1.0 - p)).ln())
}

/// `1 / (1 + e^-l)`.
pub fn prob_from_logodds(l: LogOdds) -> Result<f64, GridError> {
    if !l.is_finite() {
        return Err(GridError::NonFinite(l));
    }
    Ok(1.0 / (1.0 + (-l).exp()))
}

/// Closed interval that stored log-odds are clamped into.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogOddsBounds {
    pub min: LogOdds,
    pub max: LogOdds,
}

impl Default for LogOddsBounds {
    fn default() -> Self {
        Self {
            min: L_MIN,
            max: L_MAX,
        }
    }
}

impl LogOddsBounds {
    pub fn new(min: LogOdds, max: LogOdds) -> Result<Self, GridError> {
        if !(min.is_finite() && max.is_finite() && min < max) {
            return Err(GridError::Geometry(format!(
                "log-odds bounds [{min}, {max}] must be finite with min < max"
            )));
        }
        Ok(Self { min, max })
    }

    #[inline]
    pub fn clamp(&self, l: LogOdds) -> LogOdds {
        l.clamp(self.min, self.max)
    }
}

/// Bayesian log-odds update with the default clamp bounds.
#[inline]
pub fn update_cell(current: LogOdds, measurement: LogOdds) -> LogOdds {
    update_cell_within(current, measurement, &LogOddsBounds::default())
}

#[inline]
pub fn update_cell_within(current: LogOdds, measurement: LogOdds, bounds: &LogOddsBounds) -> LogOdds {
    bounds.clamp(current + measurement)
}

/// Importance weights of the online and offline maps in the decay average.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(try_from = "RawDecayParams")]
pub struct DecayParams {
    w_on: f64,
    w_off: f64,
    enabled: bool,
    retention: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDecayParams {
    #[serde(default = "default_w_on")]
    w_on: f64,
    #[serde(default = "default_w_off")]
    w_off: f64,
    #[serde(default = "default_true")]
    enabled: bool,
}

fn default_w_on() -> f64 {
    10.0
}
fn default_w_off() -> f64 {
    1.0
}
fn default_true() -> bool {
    true
}

impl TryFrom<RawDecayParams> for DecayParams {
    type Error = GridError;

    fn try_from(raw: RawDecayParams) -> Result<Self, Self::Error> {
        Ok(DecayParams::new(raw.w_on, raw.w_off)?.with_enabled(raw.enabled))
    }
}

impl Default for DecayParams {
    /// `w_on = 10`, `w_off = 1`, enabled: tuned for a 20 Hz update rate.
    fn default() -> Self {
        Self::new(10.0, 1.0).expect("default weights are valid")
    }
}

impl DecayParams {
    pub fn new(w_on: f64, w_off: f64) -> Result<Self, GridError> {
        let valid = w_on.is_finite() && w_off.is_finite() && w_on >= 0.0 && w_off >= 0.0 && w_on + w_off > 0.0;
        if !valid {
            return Err(GridError::DecayWeights { w_on, w_off });
        }
        Ok(Self {
            w_on,
            w_off,
            enabled: true,
            retention: w_on / (w_on + w_off),
        })
    }

    /// Default weights with decay switched off.
    pub fn disabled() -> Self {
        Self::default().with_enabled(false)
    }

    pub fn with_enabled(mut self, enabled: bool) -> Self {
        self.enabled = enabled;
        self
    }

    pub fn w_on(&self) -> f64 {
        self.w_on
    }

    pub fn w_off(&self) -> f64 {
        self.w_off
    }

    pub fn enabled(&self) -> bool {
        self.enabled
    }

    /// Fraction of the deviation from the offline value that survives one step.
    pub fn retention(&self) -> f64 {
        self.retention
    }
}

/// One decay step for a single cell. Ignores `params.enabled()`; see [`apply_decay`].
#[inline]
pub fn decay_cell(on: LogOdds, off: LogOdds, params: &DecayParams) -> LogOdds {
    let v = off + params.retention * (on - off);
    // Rounding can push the sum an ulp past `on`.
    if on >= off {
        v.clamp(off, on)
    } else {
        v.clamp(on, off)
    }
}

/// `k` decay steps in closed form.
pub fn decay_cell_pow(on: LogOdds, off: LogOdds, params: &DecayParams, k: u32) -> LogOdds {
    if k == 0 {
        return on;
    }
    let factor = params.retention.powi(k.min(i32::MAX as u32) as i32);
    let v = off + (on - off) * factor;
    if on >= off {
        v.clamp(off, on)
    } else {
        v.clamp(on, off)
    }
}

/// Applies one decay step to every cell of `map` against the cell-aligned `offline`.
/// Observed flags are left untouched. A disabled `params` is a no-op.
pub fn apply_decay(map: &mut GridMap, offline: &GridMap, params: &DecayParams) -> Result<(), GridError> {
    map.check_aligned(offline)?;
    if !params.enabled() {
        return Ok(());
    }
    for (on, &off) in map.cells.iter_mut().zip(&offline.cells) {
        *on = decay_cell(*on, off, params);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellIndex {
    pub col: usize,
    pub row: usize,
}

impl CellIndex {
    pub const fn new(col: usize, row: usize) -> Self {
        Self { col, row }
    }
}

/// Placement and size of a grid in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridGeometry {
    resolution: f64,
    origin_x: f64,
    origin_y: f64,
    width: usize,
    height: usize,
}

impl GridGeometry {
    /// `origin` is the world position of the outer corner of cell `(0, 0)`.
    pub fn new(resolution: f64, origin_x: f64, origin_y: f64, width: usize, height: usize) -> Result<Self, GridError> {
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(GridError::Geometry(format!("resolution {resolution} must be positive")));
        }
        if !(origin_x.is_finite() && origin_y.is_finite()) {
            return Err(GridError::Geometry("origin must be finite".into()));
        }
        if width == 0 || height == 0 || width.checked_mul(height).is_none() {
            return Err(GridError::Geometry(format!("invalid size {width}x{height}")));
        }
        Ok(Self {
            resolution,
            origin_x,
            origin_y,
            width,
            height,
        })
    }

    /// Smallest grid of `resolution` cells anchored at `(min_x, min_y)` that covers the rectangle.
    pub fn covering(resolution: f64, min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Result<Self, GridError> {
        if !(max_x > min_x && max_y > min_y) {
            return Err(GridError::Geometry("empty extent".into()));
        }
        let width = ((max_x - min_x) / resolution).ceil() as usize;
        let height = ((max_y - min_y) / resolution).ceil() as usize;
        Self::new(resolution, min_x, min_y, width, height)
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }
    pub fn origin(&self) -> (f64, f64) {
        (self.origin_x, self.origin_y)
    }
    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn len(&self) -> usize {
        self.width * self.height
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Unbounded cell coordinates of a world point.
    #[inline]
    pub fn cell_coords(&self, x: f64, y: f64) -> (i64, i64) {
        (
            ((x - self.origin_x) / self.resolution).floor() as i64,
            ((y - self.origin_y) / self.resolution).floor() as i64,
        )
    }

    pub fn cell_of(&self, x: f64, y: f64) -> Option<CellIndex> {
        let (c, r) = self.cell_coords(x, y);
        self.checked(c, r)
    }

    #[inline]
    pub fn checked(&self, col: i64, row: i64) -> Option<CellIndex> {
        (col >= 0 && row >= 0 && (col as usize) < self.width && (row as usize) < self.height)
            .then(|| CellIndex::new(col as usize, row as usize))
    }

    pub fn contains(&self, cell: CellIndex) -> bool {
        cell.col < self.width && cell.row < self.height
    }

    /// World coordinates of the cell center.
    pub fn cell_center(&self, cell: CellIndex) -> (f64, f64) {
        (
            self.origin_x + (cell.col as f64 + 0.5) * self.resolution,
            self.origin_y + (cell.row as f64 + 0.5) * self.resolution,
        )
    }

    /// Row-major linear index.
    #[inline]
    pub fn index(&self, cell: CellIndex) -> usize {
        cell.row * self.width + cell.col
    }

    #[inline]
    pub fn cell_at(&self, index: usize) -> CellIndex {
        CellIndex::new(index % self.width, index / self.width)
    }

    /// Bitwise equality of every geometry field.
    pub fn same_as(&self, other: &GridGeometry) -> bool {
        self.resolution.to_bits() == other.resolution.to_bits()
            && self.origin_x.to_bits() == other.origin_x.to_bits()
            && self.origin_y.to_bits() == other.origin_y.to_bits()
            && self.width == other.width
            && self.height == other.height
    }

    pub fn check_aligned(&self, other: &GridGeometry) -> Result<(), GridError> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(GridError::Misaligned(format!("{self:?} vs {other:?}")))
        }
    }
}

/// A 2D grid of log-odds cells with per-cell observed flags.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMap {
    geometry: GridGeometry,
    cells: Vec<LogOdds>,
    observed: Vec<bool>,
}

impl GridMap {
    /// All cells unknown: value `0.0`, not observed.
    pub fn new(geometry: GridGeometry) -> Self {
        Self::filled(geometry, 0.0)
    }

    /// All cells at `value`, not observed.
    pub fn filled(geometry: GridGeometry, value: LogOdds) -> Self {
        let n = geometry.len();
        Self {
            geometry,
            cells: vec![value; n],
            observed: vec![false; n],
        }
    }

    pub fn from_parts(geometry: GridGeometry, cells: Vec<LogOdds>, observed: Vec<bool>) -> Result<Self, GridError> {
        if cells.len() != geometry.len() || observed.len() != geometry.len() {
            return Err(GridError::Geometry(format!(
                "expected {} cells, got {} values and {} flags",
                geometry.len(),
                cells.len(),
                observed.len()
            )));
        }
        if let Some(&bad) = cells.iter().find(|v| !v.is_finite()) {
            return Err(GridError::NonFinite(bad));
        }
        Ok(Self {
            geometry,
            cells,
            observed,
        })
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }
    pub fn width(&self) -> usize {
        self.geometry.width
    }
    pub fn height(&self) -> usize {
        self.geometry.height
    }
    pub fn resolution(&self) -> f64 {
        self.geometry.resolution
    }

    pub fn values(&self) -> &[LogOdds] {
        &self.cells
    }
    pub fn observed_flags(&self) -> &[bool] {
        &self.observed
    }

    pub fn get(&self, cell: CellIndex) -> LogOdds {
        self.cells[self.geometry.index(cell)]
    }

    pub fn is_observed(&self, cell: CellIndex) -> bool {
        self.observed[self.geometry.index(cell)]
    }

    /// Stores `value` without touching the observed flag.
    pub fn set(&mut self, cell: CellIndex, value: LogOdds) {
        let i = self.geometry.index(cell);
        self.cells[i] = value;
    }

    pub fn set_observed(&mut self, cell: CellIndex, observed: bool) {
        let i = self.geometry.index(cell);
        self.observed[i] = observed;
    }

    #[inline]
    pub(crate) fn value_at(&self, index: usize) -> LogOdds {
        self.cells[index]
    }

    #[inline]
    pub(crate) fn store_at(&mut self, index: usize, value: LogOdds, observed: bool) {
        self.cells[index] = value;
        self.observed[index] = observed;
    }

    /// Adds `measurement` to the cell, clamps, and marks it observed.
    pub fn update(&mut self, cell: CellIndex, measurement: LogOdds, bounds: &LogOddsBounds) -> LogOdds {
        let i = self.geometry.index(cell);
        let v = update_cell_within(self.cells[i], measurement, bounds);
        self.cells[i] = v;
        self.observed[i] = true;
        v
    }

    pub fn observed_count(&self) -> usize {
        self.observed.iter().filter(|&&o| o).count()
    }

    pub fn check_aligned(&self, other: &GridMap) -> Result<(), GridError> {
        self.geometry.check_aligned(&other.geometry)
    }

    /// Largest absolute value difference and the number of cells whose value
    /// bits or observed flag differ.
    pub fn diff(&self, other: &GridMap) -> Result<MapDiff, GridError> {
        self.check_aligned(other)?;
        let mut max_abs = 0.0f64;
        let mut differing = 0usize;
        for i in 0..self.cells.len() {
            let (a, b) = (self.cells[i], other.cells[i]);
            max_abs = max_abs.max((a - b).abs());
            if a.to_bits() != b.to_bits() || self.observed[i] != other.observed[i] {
                differing += 1;
            }
        }
        Ok(MapDiff {
            max_abs_diff: max_abs,
            differing_cells: differing,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapDiff {
    pub max_abs_diff: f64,
    pub differing_cells: usize,
}
