//! Run metrics: trace-region deviation, trace persistence and occupancy IoU.

use std::io::Write;

use thiserror::Error;

use crate::grid::LogOdds;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("trace region is empty")]
    EmptyRegion,
    #[error("tick {tick}: {found} trace samples for a region of {expected} cells")]
    SampleCount { tick: usize, expected: usize, found: usize },
    #[error("trace epsilon must be positive, got {0}")]
    Epsilon(f64),
}

/// Cells, in offline map coordinates, where a moving object can leave a trace,
/// together with their offline values.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraceRegion {
    pub cells: Vec<(i64, i64)>,
    pub offline: Vec<LogOdds>,
}

impl TraceRegion {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

/// Cell counts of the thresholded online map against ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Overlap {
    pub intersection: usize,
    pub union: usize,
}

impl Overlap {
    /// Intersection over union; `1.0` when both sets are empty.
    pub fn iou(&self) -> f64 {
        if self.union == 0 {
            1.0
        } else {
            self.intersection as f64 / self.union as f64
        }
    }
}

/// State observed at one tick.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSample {
    pub tick: usize,
    pub t_sec: f64,
    /// Online values of the trace-region cells, in region order.
    pub trace_values: Vec<LogOdds>,
    pub observed_cells: usize,
    pub overlap: Overlap,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickMetrics {
    pub tick: usize,
    pub t_sec: f64,
    pub trace_max_dev: f64,
    pub observed_cells: usize,
    pub iou: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub ticks: Vec<TickMetrics>,
    pub peak_trace_dev: f64,
    /// Last tick at which the peak deviation was attained.
    pub peak_tick: usize,
    /// Ticks from the peak until the maximum deviation first drops below
    /// epsilon. `None` if it never does.
    pub trace_persistence: Option<usize>,
    pub final_iou: f64,
}

pub fn compute_metrics(frames: &[FrameSample], region: &TraceRegion, epsilon: f64) -> Result<RunMetrics, MetricsError> {
    if region.is_empty() {
        return Err(MetricsError::EmptyRegion);
    }
    metrics_for_region(frames, region, epsilon)
}

/// As [`compute_metrics`], but an empty region yields zero deviation.
pub(crate) fn metrics_for_region(frames: &[FrameSample], region: &TraceRegion, epsilon: f64) -> Result<RunMetrics, MetricsError> {
    if !(epsilon > 0.0) {
        return Err(MetricsError::Epsilon(epsilon));
    }
    let mut ticks = Vec::with_capacity(frames.len());
    for f in frames {
        if f.trace_values.len() != region.len() {
            return Err(MetricsError::SampleCount {
                tick: f.tick,
                expected: region.len(),
                found: f.trace_values.len(),
            });
        }
        let dev = f
            .trace_values
            .iter()
            .zip(&region.offline)
            .map(|(v, o)| (v - o).abs())
            .fold(0.0, f64::max);
        ticks.push(TickMetrics {
            tick: f.tick,
            t_sec: f.t_sec,
            trace_max_dev: dev,
            observed_cells: f.observed_cells,
            iou: f.overlap.iou(),
            wall_ms: f.wall_ms,
        });
    }

    let mut peak = 0.0;
    let mut peak_at = 0;
    for (i, m) in ticks.iter().enumerate() {
        if m.trace_max_dev >= peak {
            peak = m.trace_max_dev;
            peak_at = i;
        }
    }
    let trace_persistence = ticks[peak_at..].iter().position(|m| m.trace_max_dev < epsilon);

    Ok(RunMetrics {
        peak_trace_dev: peak,
        peak_tick: ticks.get(peak_at).map_or(0, |m| m.tick),
        trace_persistence,
        final_iou: ticks.last().map_or(1.0, |m| m.iou),
        ticks,
    })
}

pub const CSV_HEADER: &str = "tick,t_sec,trace_max_dev,observed_cells,iou";

/// Per-tick rows; wall time is left out so the file is reproducible.
pub fn write_metrics_csv<W: Write>(metrics: &RunMetrics, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for m in &metrics.ticks {
        writeln!(out, "{},{},{},{},{}", m.tick, m.t_sec, m.trace_max_dev, m.observed_cells, m.iou)?;
    }
    Ok(())
}
