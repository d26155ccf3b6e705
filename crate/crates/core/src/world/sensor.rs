use std::f64::consts::TAU;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Pose, World, WorldError};

const RAY_EPS: f64 = 1e-9;

/// Optional Gaussian range noise. The generator is reseeded per sweep from
/// `seed` and the sweep timestamp, so sweeps stay reproducible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeNoise {
    pub std_dev: f64,
    pub seed: u64,
}

/// Revolving multi-beam range sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorConfig {
    pub beam_count: usize,
    /// Beam elevations in radians, strictly increasing; the first points downward.
    pub vertical_angles: Vec<f64>,
    /// Azimuth increment between consecutive vertical scans, radians.
    pub horizontal_step: f64,
    pub max_range: f64,
    /// Sensor height above the ground plane.
    pub mount_height: f64,
    pub sweep_rate: f64,
    pub noise: Option<RangeNoise>,
}

impl Default for SensorConfig {
    /// 32 beams evenly spaced over [-30°, +10°], 720 scans per revolution,
    /// 70 m range, mounted 2 m above the ground, 20 Hz.
    fn default() -> Self {
        Self {
            beam_count: 32,
            vertical_angles: linspace_deg(-30.0, 10.0, 32),
            horizontal_step: TAU / 720.0,
            max_range: 70.0,
            mount_height: 2.0,
            sweep_rate: 20.0,
            noise: None,
        }
    }
}

pub(crate) fn linspace_deg(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo.to_radians()],
        _ => (0..n)
            .map(|i| (lo + (hi - lo) * i as f64 / (n - 1) as f64).to_radians())
            .collect(),
    }
}

impl SensorConfig {
    pub fn validate(&self) -> Result<(), WorldError> {
        let err = |m: String| Err(WorldError::Config(m));
        if self.beam_count == 0 || self.vertical_angles.len() != self.beam_count {
            return err(format!(
                "vertical_angles has {} entries, beam_count is {}",
                self.vertical_angles.len(),
                self.beam_count
            ));
        }
        if self.vertical_angles.iter().any(|a| !a.is_finite() || a.abs() >= std::f64::consts::FRAC_PI_2) {
            return err("vertical angles must lie strictly between -90° and +90°".into());
        }
        if self.vertical_angles.windows(2).any(|w| !(w[1] > w[0])) {
            return err("vertical angles must be strictly increasing".into());
        }
        if !(self.vertical_angles[0] < 0.0) {
            return err("the first beam must point downward".into());
        }
        if !(self.horizontal_step > 0.0 && self.horizontal_step <= TAU) {
            return err(format!("horizontal_step {} out of range", self.horizontal_step));
        }
        let scans = TAU / self.horizontal_step;
        if (scans - scans.round()).abs() > 1e-9 * scans.max(1.0) {
            return err(format!("horizontal_step {} does not divide a full turn", self.horizontal_step));
        }
        if !(self.max_range > 0.0 && self.max_range.is_finite()) {
            return err("max_range must be positive".into());
        }
        if !(self.mount_height > 0.0 && self.mount_height.is_finite()) {
            return err("mount_height must be positive".into());
        }
        if !(self.sweep_rate > 0.0 && self.sweep_rate.is_finite()) {
            return err("sweep_rate must be positive".into());
        }
        if let Some(n) = self.noise {
            if !(n.std_dev >= 0.0 && n.std_dev.is_finite()) {
                return err("range noise std_dev must be nonnegative".into());
            }
        }
        Ok(())
    }

    pub fn scans_per_revolution(&self) -> usize {
        (TAU / self.horizontal_step).round() as usize
    }

    /// Horizontal distance of the lowest beam's ground intersection on flat ground.
    /// Nothing closer to the sensor ever produces a ground return.
    pub fn blind_radius(&self) -> f64 {
        self.mount_height / self.vertical_angles[0].abs().tan()
    }
}

/// One beam return.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub range: f64,
    /// World-frame point `[x, y, z]`.
    pub point: [f64; 3],
}

/// All beams fired at one azimuth. `returns[i]` is `None` when beam `i` saw
/// nothing within the maximum range.
#[derive(Debug, Clone, PartialEq)]
pub struct VerticalScan {
    pub azimuth: f64,
    pub returns: Vec<Option<Hit>>,
}

impl VerticalScan {
    pub fn ranges(&self) -> impl Iterator<Item = Option<f64>> + '_ {
        self.returns.iter().map(|r| r.map(|h| h.range))
    }
}

/// One full revolution.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub t: f64,
    pub ego_pose: Pose,
    /// Sensor origin in world coordinates.
    pub origin: [f64; 3],
    pub ground_z: f64,
    pub vertical_angles: Vec<f64>,
    pub max_range: f64,
    pub scans: Vec<VerticalScan>,
}

/// Solid the ray tracer knows about, in a frame where it is axis-aligned.
struct Solid {
    /// Rotation of the world into the box frame, `(sin, cos)` of `-heading`.
    rot: Option<(f64, f64)>,
    center: (f64, f64),
    lo: [f64; 3],
    hi: [f64; 3],
}

impl Solid {
    fn intersect(&self, o: [f64; 3], d: [f64; 3]) -> Option<f64> {
        let (o, d) = match self.rot {
            None => (o, d),
            Some((s, c)) => {
                let (dx, dy) = (o[0] - self.center.0, o[1] - self.center.1);
                (
                    [c * dx - s * dy, s * dx + c * dy, o[2]],
                    [c * d[0] - s * d[1], s * d[0] + c * d[1], d[2]],
                )
            }
        };
        slab(o, d, self.lo, self.hi)
    }
}

/// Entry distance of a ray into an axis-aligned box; `None` if it misses or
/// starts inside.
fn slab(o: [f64; 3], d: [f64; 3], lo: [f64; 3], hi: [f64; 3]) -> Option<f64> {
    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    for k in 0..3 {
        if d[k] == 0.0 {
            if o[k] < lo[k] || o[k] > hi[k] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / d[k];
        let (mut t0, mut t1) = ((lo[k] - o[k]) * inv, (hi[k] - o[k]) * inv);
        if t0 > t1 {
            std::mem::swap(&mut t0, &mut t1);
        }
        t_near = t_near.max(t0);
        t_far = t_far.min(t1);
        if t_near > t_far {
            return None;
        }
    }
    (t_near > RAY_EPS).then_some(t_near)
}

fn solids_at(world: &World, t: f64) -> Vec<Solid> {
    let gz = world.ground_z();
    let statics = world.static_boxes().iter().map(|b| Solid {
        rot: None,
        center: (0.0, 0.0),
        lo: [b.footprint.min_x, b.footprint.min_y, gz],
        hi: [b.footprint.max_x, b.footprint.max_y, b.top],
    });
    let dynamics = world.dynamic_objects().iter().map(|obj| {
        let p = obj.trajectory.pose_at(t);
        let (hl, hw) = (obj.length * 0.5, obj.width * 0.5);
        Solid {
            rot: Some((-p.yaw).sin_cos()),
            center: (p.x, p.y),
            lo: [-hl, -hw, gz],
            hi: [hl, hw, gz + obj.height],
        }
    });
    statics.chain(dynamics).collect()
}

/// Fires every beam of one revolution from `ego` at time `t`.
///
/// Moving objects are frozen at `t` for the whole revolution. Scan `i` has
/// world-frame azimuth `i * horizontal_step`.
pub fn simulate_sweep(world: &World, ego: &Pose, cfg: &SensorConfig, t: f64) -> Result<Sweep, WorldError> {
    cfg.validate()?;
    if !world.bounds().contains(ego.x, ego.y) {
        return Err(WorldError::Scenario(format!(
            "ego pose ({}, {}) lies outside the world bounds",
            ego.x, ego.y
        )));
    }
    let origin = [ego.x, ego.y, world.ground_z() + cfg.mount_height];
    let solids = solids_at(world, t);
    let elevations: Vec<(f64, f64)> = cfg.vertical_angles.iter().map(|a| a.sin_cos()).collect();

    let mut noise = cfg.noise.filter(|n| n.std_dev > 0.0).map(|n| {
        let rng = ChaCha8Rng::seed_from_u64(n.seed ^ t.to_bits());
        (rng, Normal::new(0.0, n.std_dev).expect("validated std_dev"))
    });

    let n_scans = cfg.scans_per_revolution();
    let mut scans = Vec::with_capacity(n_scans);
    for i in 0..n_scans {
        let azimuth = i as f64 * cfg.horizontal_step;
        let (saz, caz) = azimuth.sin_cos();
        let mut returns = Vec::with_capacity(cfg.beam_count);
        for &(sel, cel) in &elevations {
            let dir = [cel * caz, cel * saz, sel];
            let mut best = f64::INFINITY;
            if dir[2] < 0.0 {
                best = (world.ground_z() - origin[2]) / dir[2];
            }
            for s in &solids {
                if let Some(d) = s.intersect(origin, dir) {
                    best = best.min(d);
                }
            }
            let mut hit = None;
            if best <= cfg.max_range {
                let mut range = best;
                if let Some((rng, dist)) = noise.as_mut() {
                    range = (range + dist.sample(rng)).clamp(1e-6, cfg.max_range);
                }
                hit = Some(Hit {
                    range,
                    point: [
                        origin[0] + dir[0] * range,
                        origin[1] + dir[1] * range,
                        origin[2] + dir[2] * range,
                    ],
                });
            }
            returns.push(hit);
        }
        scans.push(VerticalScan { azimuth, returns });
    }

    Ok(Sweep {
        t,
        ego_pose: *ego,
        origin,
        ground_z: world.ground_z(),
        vertical_angles: cfg.vertical_angles.clone(),
        max_range: cfg.max_range,
        scans,
    })
}

/// Writes one line per vertical scan: `t azimuth r_0 ... r_{n-1}`, with
/// `inf` for beams that produced no return.
pub fn write_sweep_log<W: Write>(sweep: &Sweep, mut out: W) -> std::io::Result<()> {
    for scan in &sweep.scans {
        write!(out, "{} {}", sweep.t, scan.azimuth)?;
        for r in scan.ranges() {
            match r {
                Some(r) => write!(out, " {r}")?,
                None => write!(out, " inf")?,
            }
        }
        writeln!(out)?;
    }
    Ok(())
}
