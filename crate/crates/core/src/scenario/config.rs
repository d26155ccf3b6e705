//! Scenario configuration files.
//!
//! JSON with unknown keys rejected. Only `world`, `ego` and `duration` are
//! required; see `scenarios/overtaking.json` for a fully populated example.

use std::collections::HashSet;
use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::fusion::CleanParams;
use crate::grid::DecayParams;
use crate::instant::InstantConfig;
use crate::world::{DynamicObject, Pose, RangeNoise, Rect, SensorConfig, StaticBox, Trajectory, World};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed scenario config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: impl Into<String>, reason: impl ToString) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        reason: reason.to_string(),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default = "default_name")]
    name: String,
    world: RawWorld,
    ego: Vec<Pose>,
    #[serde(default)]
    offline_ego: Option<Vec<Pose>>,
    #[serde(default)]
    dynamic_objects: Vec<RawObject>,
    #[serde(default)]
    sensor: RawSensor,
    #[serde(default)]
    decay: DecayParams,
    #[serde(default)]
    instant: InstantConfig,
    #[serde(default)]
    clean: CleanParams,
    duration: f64,
    #[serde(default = "default_tick_rate")]
    tick_rate: f64,
    #[serde(default = "default_resolution")]
    resolution: f64,
    #[serde(default = "default_window")]
    window_size: f64,
    #[serde(default = "default_output_dir")]
    output_dir: PathBuf,
    #[serde(default = "default_stride")]
    render_stride: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_trace_epsilon")]
    trace_epsilon: f64,
    #[serde(default)]
    offline_map: Option<PathBuf>,
    #[serde(default)]
    dump_sweeps: bool,
}

fn default_name() -> String {
    "scenario".into()
}
fn default_tick_rate() -> f64 {
    20.0
}
fn default_resolution() -> f64 {
    0.2
}
fn default_window() -> f64 {
    150.0
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_stride() -> usize {
    5
}
fn default_trace_epsilon() -> f64 {
    0.1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWorld {
    bounds: Rect,
    #[serde(default)]
    ground_z: f64,
    #[serde(default)]
    static_boxes: Vec<RawBox>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBox {
    name: String,
    min_x: f64,
    min_y: f64,
    max_x: f64,
    max_y: f64,
    top: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawObject {
    name: String,
    length: f64,
    width: f64,
    height: f64,
    trajectory: Vec<Pose>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawSensor {
    beam_count: usize,
    /// Explicit elevations; otherwise `beam_count` beams evenly spaced
    /// between `min_angle_deg` and `max_angle_deg`.
    vertical_angles_deg: Option<Vec<f64>>,
    min_angle_deg: f64,
    max_angle_deg: f64,
    scans_per_revolution: usize,
    max_range: f64,
    mount_height: f64,
    sweep_rate: f64,
    range_noise_std: f64,
}

impl Default for RawSensor {
    fn default() -> Self {
        Self {
            beam_count: 32,
            vertical_angles_deg: None,
            min_angle_deg: -30.0,
            max_angle_deg: 10.0,
            scans_per_revolution: 720,
            max_range: 70.0,
            mount_height: 2.0,
            sweep_rate: 20.0,
            range_noise_std: 0.0,
        }
    }
}

/// Validated scenario with defaults applied.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub name: String,
    /// Static boxes and the moving objects of the online run.
    pub world: World,
    pub ego: Trajectory,
    /// Trajectory of the mapping drive; the ego trajectory when absent.
    pub offline_ego: Option<Trajectory>,
    pub sensor: SensorConfig,
    pub decay: DecayParams,
    pub instant: InstantConfig,
    pub clean: CleanParams,
    pub duration: f64,
    pub tick_rate: f64,
    pub resolution: f64,
    pub window_size: f64,
    pub output_dir: PathBuf,
    pub render_stride: usize,
    pub seed: u64,
    pub trace_epsilon: f64,
    /// Prebuilt offline map to load instead of running the mapping drive.
    pub offline_map: Option<PathBuf>,
    pub dump_sweeps: bool,
}

impl ScenarioConfig {
    /// Number of online ticks: `round(duration * tick_rate)`.
    pub fn tick_count(&self) -> usize {
        (self.duration * self.tick_rate).round() as usize
    }

    pub fn tick_time(&self, tick: usize) -> f64 {
        tick as f64 / self.tick_rate
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ScenarioConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let raw: RawConfig = serde_json::from_str(text)?;
    raw.validate()
}

fn positive(field: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(invalid(field, format!("must be positive, got {v}")))
    }
}

fn trajectory(field: &str, knots: Vec<Pose>, bounds: &Rect) -> Result<Trajectory, ConfigError> {
    let tr = Trajectory::new(knots).map_err(|e| invalid(field, e))?;
    if let Some(k) = tr.knots().iter().find(|k| !bounds.contains(k.x, k.y)) {
        return Err(invalid(field, format!("knot ({}, {}) lies outside the world bounds", k.x, k.y)));
    }
    Ok(tr)
}

impl RawConfig {
    fn validate(self) -> Result<ScenarioConfig, ConfigError> {
        let duration = positive("duration", self.duration)?;
        let tick_rate = positive("tick_rate", self.tick_rate)?;
        let resolution = positive("resolution", self.resolution)?;
        let window_size = positive("window_size", self.window_size)?;
        if window_size < resolution {
            return Err(invalid("window_size", "smaller than one cell"));
        }
        positive("trace_epsilon", self.trace_epsilon)?;
        if self.render_stride == 0 {
            return Err(invalid("render_stride", "must be at least 1"));
        }

        let bounds = self.world.bounds;
        bounds.validate().map_err(|e| invalid("world.bounds", e))?;
        if !self.world.ground_z.is_finite() {
            return Err(invalid("world.ground_z", "must be finite"));
        }

        let mut names = HashSet::new();
        let mut statics = Vec::new();
        for (i, b) in self.world.static_boxes.into_iter().enumerate() {
            let field = format!("world.static_boxes[{i}]");
            let footprint = Rect::new(b.min_x, b.min_y, b.max_x, b.max_y).map_err(|e| invalid(&field, e))?;
            if !bounds.contains_rect(&footprint) {
                return Err(invalid(&field, "box lies outside the world bounds"));
            }
            if !(b.top > self.world.ground_z) {
                return Err(invalid(format!("{field}.top"), "must be above ground_z"));
            }
            if !names.insert(b.name.clone()) {
                return Err(invalid(format!("{field}.name"), format!("duplicate object name {:?}", b.name)));
            }
            statics.push(StaticBox {
                name: b.name,
                footprint,
                top: b.top,
            });
        }

        let mut dynamics = Vec::new();
        for (i, o) in self.dynamic_objects.into_iter().enumerate() {
            let field = format!("dynamic_objects[{i}]");
            if !names.insert(o.name.clone()) {
                return Err(invalid(format!("{field}.name"), format!("duplicate object name {:?}", o.name)));
            }
            let tr = Trajectory::new(o.trajectory).map_err(|e| invalid(format!("{field}.trajectory"), e))?;
            dynamics.push(DynamicObject::new(o.name, o.length, o.width, o.height, tr).map_err(|e| invalid(&field, e))?);
        }

        let world = World::new(self.world.ground_z, bounds, statics, dynamics).map_err(|e| invalid("world", e))?;
        let ego = trajectory("ego", self.ego, &bounds)?;
        let offline_ego = self
            .offline_ego
            .map(|k| trajectory("offline_ego", k, &bounds))
            .transpose()?;

        let s = self.sensor;
        if s.scans_per_revolution == 0 {
            return Err(invalid("sensor.scans_per_revolution", "must be at least 1"));
        }
        let vertical_angles = match s.vertical_angles_deg {
            Some(v) => v.iter().map(|d| d.to_radians()).collect(),
            None => crate::world::sensor_linspace_deg(s.min_angle_deg, s.max_angle_deg, s.beam_count),
        };
        let sensor = SensorConfig {
            beam_count: s.beam_count,
            vertical_angles,
            horizontal_step: TAU / s.scans_per_revolution as f64,
            max_range: s.max_range,
            mount_height: s.mount_height,
            sweep_rate: s.sweep_rate,
            noise: (s.range_noise_std != 0.0).then_some(RangeNoise {
                std_dev: s.range_noise_std,
                seed: self.seed,
            }),
        };
        sensor.validate().map_err(|e| invalid("sensor", e))?;
        self.instant.validate().map_err(|e| invalid("instant", e))?;
        self.clean.validate().map_err(|e| invalid("clean", e))?;

        Ok(ScenarioConfig {
            name: self.name,
            world,
            ego,
            offline_ego,
            sensor,
            decay: self.decay,
            instant: self.instant,
            clean: self.clean,
            duration,
            tick_rate,
            resolution,
            window_size,
            output_dir: self.output_dir,
            render_stride: self.render_stride,
            seed: self.seed,
            trace_epsilon: self.trace_epsilon,
            offline_map: self.offline_map,
            dump_sweeps: self.dump_sweeps,
        })
    }
}
