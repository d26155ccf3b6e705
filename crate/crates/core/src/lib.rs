//! Occupancy grid mapping with decay toward a prebuilt offline map.
//!
//! A vehicle carries a revolving multi-beam range sensor through a simulated
//! street. Each sweep becomes an instantaneous occupancy map that is fused
//! into an online log-odds grid centered on the vehicle. Before every update
//! the online grid is pulled toward the offline map of the static
//! environment, so evidence left behind by moving objects fades once it is
//! no longer re-observed.
//!
//! - [`grid`]: log-odds cells, the decay rule, grid geometry and the OGM1 file format.
//! - [`world`]: the simulated world and sensor.
//! - [`instant`]: per-sweep obstacle classification and free-space ray casting.
//! - [`fusion`]: offline map construction and cleaning, the online window and its update cycle.
//! - [`scenario`]: scenario files, run loop, metrics, PPM rendering and the CLI.

pub mod fusion;
pub mod grid;
pub mod instant;
pub mod scenario;
pub mod world;
