use serde::Deserialize;

use super::WorldError;

/// Axis-aligned rectangle in world meters.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Rect {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Result<Self, WorldError> {
        let r = Self {
            min_x,
            min_y,
            max_x,
            max_y,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        let finite = [self.min_x, self.min_y, self.max_x, self.max_y].iter().all(|v| v.is_finite());
        if !finite || !(self.max_x > self.min_x && self.max_y > self.min_y) {
            return Err(WorldError::Config(format!("degenerate rectangle {self:?}")));
        }
        Ok(())
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.min_x && x <= self.max_x && y >= self.min_y && y <= self.max_y
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.min_x >= self.min_x && other.max_x <= self.max_x && other.min_y >= self.min_y && other.max_y <= self.max_y
    }

    /// True when the two rectangles share a region of positive area.
    pub fn overlaps(&self, other: &Rect) -> bool {
        self.min_x < other.max_x && other.min_x < self.max_x && self.min_y < other.max_y && other.min_y < self.max_y
    }
}

/// Rectangle centered at `(cx, cy)` with its length along `heading`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedRect {
    pub cx: f64,
    pub cy: f64,
    pub heading: f64,
    pub half_length: f64,
    pub half_width: f64,
}

impl OrientedRect {
    pub fn new(cx: f64, cy: f64, heading: f64, length: f64, width: f64) -> Self {
        Self {
            cx,
            cy,
            heading,
            half_length: length * 0.5,
            half_width: width * 0.5,
        }
    }

    /// World point expressed in the rectangle frame.
    #[inline]
    pub fn to_local(&self, x: f64, y: f64) -> (f64, f64) {
        let (s, c) = self.heading.sin_cos();
        let (dx, dy) = (x - self.cx, y - self.cy);
        (c * dx + s * dy, -s * dx + c * dy)
    }

    pub fn corners(&self) -> [(f64, f64); 4] {
        let (s, c) = self.heading.sin_cos();
        let (l, w) = (self.half_length, self.half_width);
        [(l, w), (-l, w), (-l, -w), (l, -w)].map(|(u, v)| (self.cx + c * u - s * v, self.cy + s * u + c * v))
    }

    pub fn bounding_rect(&self) -> Rect {
        let cs = self.corners();
        let fold = |f: fn(f64, f64) -> f64, init: f64, pick: fn(&(f64, f64)) -> f64| cs.iter().map(pick).fold(init, f);
        Rect {
            min_x: fold(f64::min, f64::INFINITY, |p| p.0),
            min_y: fold(f64::min, f64::INFINITY, |p| p.1),
            max_x: fold(f64::max, f64::NEG_INFINITY, |p| p.0),
            max_y: fold(f64::max, f64::NEG_INFINITY, |p| p.1),
        }
    }

    /// Separating-axis test against an axis-aligned rectangle; touching edges do not count.
    pub fn overlaps_rect(&self, r: &Rect) -> bool {
        let mine = self.corners();
        let theirs = [(r.min_x, r.min_y), (r.max_x, r.min_y), (r.max_x, r.max_y), (r.min_x, r.max_y)];
        let (s, c) = self.heading.sin_cos();
        let axes = [(1.0, 0.0), (0.0, 1.0), (c, s), (-s, c)];
        axes.iter().all(|&(ax, ay)| {
            let project = |pts: &[(f64, f64); 4]| {
                pts.iter()
                    .map(|p| p.0 * ax + p.1 * ay)
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
            };
            let (a0, a1) = project(&mine);
            let (b0, b1) = project(&theirs);
            a0 < b1 - 1e-12 && b0 < a1 - 1e-12
        })
    }
}
