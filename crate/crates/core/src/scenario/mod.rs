//! Scenario harness: configuration, the two-phase run loop, metrics,
//! frame rendering and the command-line interface.

pub mod cli;
pub mod config;
pub mod metrics;
pub mod render;
pub mod run;

pub use cli::cli_main;
pub use config::{load_config, parse_config, ConfigError, ScenarioConfig};
pub use metrics::{compute_metrics, write_metrics_csv, FrameSample, MetricsError, Overlap, RunMetrics, TickMetrics, TraceRegion};
pub use render::{encode_ppm, gray_level, render_frame, write_ppm, UNOBSERVED_RGB};
pub use run::{
    build_offline_map, mapping_poses, obtain_offline_map, offline_geometry, run_scenario, OnlineRun, RunReport, ScenarioError,
    HoldCount, StaticHold, StaticTruth, TickOutput, TraceHistory, STATIC_HOLD_PROB,
};
