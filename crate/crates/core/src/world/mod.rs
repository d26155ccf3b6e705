//! Deterministic 2.5-D world and a revolving multi-beam range sensor.
//!
//! The world is a flat ground plane with axis-aligned static boxes and
//! oriented boxes that move along piecewise-linear trajectories. Rays are
//! intersected analytically against all of them.

mod geometry;
mod sensor;
mod trajectory;

pub use geometry::{OrientedRect, Rect};
pub(crate) use sensor::linspace_deg as sensor_linspace_deg;
pub use sensor::{simulate_sweep, write_sweep_log, Hit, RangeNoise, SensorConfig, Sweep, VerticalScan};
pub use trajectory::{ego_pose_at, normalize_angle, object_pose_at, Pose, Trajectory};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("scenario error: {0}")]
    Scenario(String),
}

/// Static obstacle: an axis-aligned footprint extruded from the ground to `top`.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticBox {
    pub name: String,
    pub footprint: Rect,
    /// Absolute height of the box top.
    pub top: f64,
}

/// An oriented box of fixed size whose center follows a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicObject {
    pub name: String,
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub trajectory: Trajectory,
}

impl DynamicObject {
    pub fn new(name: impl Into<String>, length: f64, width: f64, height: f64, trajectory: Trajectory) -> Result<Self, WorldError> {
        let name = name.into();
        if !(length > 0.0 && width > 0.0 && height > 0.0) || !(length.is_finite() && width.is_finite() && height.is_finite()) {
            return Err(WorldError::Config(format!("object {name:?}: dimensions must be positive")));
        }
        Ok(Self {
            name,
            length,
            width,
            height,
            trajectory,
        })
    }

    pub fn footprint_at(&self, t: f64) -> OrientedRect {
        let p = self.trajectory.pose_at(t);
        OrientedRect::new(p.x, p.y, p.yaw, self.length, self.width)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    ground_z: f64,
    bounds: Rect,
    static_boxes: Vec<StaticBox>,
    dynamic_objects: Vec<DynamicObject>,
}

impl World {
    pub fn new(
        ground_z: f64,
        bounds: Rect,
        static_boxes: Vec<StaticBox>,
        dynamic_objects: Vec<DynamicObject>,
    ) -> Result<Self, WorldError> {
        if !ground_z.is_finite() {
            return Err(WorldError::Config("ground_z must be finite".into()));
        }
        for b in &static_boxes {
            if !bounds.contains_rect(&b.footprint) {
                return Err(WorldError::Config(format!("static box {:?} lies outside the world bounds", b.name)));
            }
            if !(b.top > ground_z) {
                return Err(WorldError::Config(format!("static box {:?}: top must be above the ground", b.name)));
            }
        }
        Ok(Self {
            ground_z,
            bounds,
            static_boxes,
            dynamic_objects,
        })
    }

    pub fn empty(bounds: Rect) -> Self {
        Self {
            ground_z: 0.0,
            bounds,
            static_boxes: Vec::new(),
            dynamic_objects: Vec::new(),
        }
    }

    pub fn ground_z(&self) -> f64 {
        self.ground_z
    }
    pub fn bounds(&self) -> &Rect {
        &self.bounds
    }
    pub fn static_boxes(&self) -> &[StaticBox] {
        &self.static_boxes
    }
    pub fn dynamic_objects(&self) -> &[DynamicObject] {
        &self.dynamic_objects
    }

    /// The same world with every moving object removed.
    pub fn without_dynamic(&self) -> World {
        World {
            dynamic_objects: Vec::new(),
            ..self.clone()
        }
    }
}
