use serde::Deserialize;
use std::f64::consts::{PI, TAU};

use super::WorldError;

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(a: f64) -> f64 {
    let r = (a + PI).rem_euclid(TAU) - PI;
    if r <= -PI {
        r + TAU
    } else {
        r
    }
}

/// Planar pose with a timestamp. `yaw` is kept in `(-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(from = "RawPose")]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub t: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPose {
    x: f64,
    y: f64,
    #[serde(default)]
    yaw: f64,
    t: f64,
}

impl From<RawPose> for Pose {
    fn from(r: RawPose) -> Self {
        Pose::new(r.x, r.y, r.yaw, r.t)
    }
}

impl Pose {
    pub fn new(x: f64, y: f64, yaw: f64, t: f64) -> Self {
        Self {
            x,
            y,
            yaw: normalize_angle(yaw),
            t,
        }
    }
}

/// Piecewise-linear pose over time with strictly increasing knot timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    knots: Vec<Pose>,
}

impl Trajectory {
    pub fn new(knots: Vec<Pose>) -> Result<Self, WorldError> {
        if knots.is_empty() {
            return Err(WorldError::Config("trajectory has no knots".into()));
        }
        if knots.iter().any(|k| !(k.x.is_finite() && k.y.is_finite() && k.yaw.is_finite() && k.t.is_finite())) {
            return Err(WorldError::Config("trajectory knots must be finite".into()));
        }
        if knots.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return Err(WorldError::Config("trajectory timestamps must be strictly increasing".into()));
        }
        Ok(Self { knots })
    }

    /// A single pose held forever.
    pub fn stationary(x: f64, y: f64, yaw: f64) -> Self {
        Self {
            knots: vec![Pose::new(x, y, yaw, 0.0)],
        }
    }

    pub fn knots(&self) -> &[Pose] {
        &self.knots
    }

    pub fn start_time(&self) -> f64 {
        self.knots[0].t
    }

    pub fn end_time(&self) -> f64 {
        self.knots[self.knots.len() - 1].t
    }

    /// Linear position and shortest-arc heading between knots, clamped outside the knot range.
    pub fn pose_at(&self, t: f64) -> Pose {
        let first = self.knots[0];
        let last = self.knots[self.knots.len() - 1];
        if t <= first.t {
            return Pose { t, ..first };
        }
        if t >= last.t {
            return Pose { t, ..last };
        }
        // First knot strictly after t; exists and is > 0 by the checks above.
        let hi = self.knots.partition_point(|k| k.t <= t);
        let (a, b) = (self.knots[hi - 1], self.knots[hi]);
        if t == a.t {
            return Pose { t, ..a };
        }
        let s = (t - a.t) / (b.t - a.t);
        let dyaw = normalize_angle(b.yaw - a.yaw);
        Pose::new(a.x + (b.x - a.x) * s, a.y + (b.y - a.y) * s, a.yaw + dyaw * s, t)
    }
}

pub fn object_pose_at(obj: &super::DynamicObject, t: f64) -> Pose {
    obj.trajectory.pose_at(t)
}

pub fn ego_pose_at(trajectory: &Trajectory, t: f64) -> Pose {
    trajectory.pose_at(t)
}
