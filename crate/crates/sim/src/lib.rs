//! Std companion to `waveshot-core`: scenario files, the headless runner,
//! traces and metrics, the live telemetry server, and depth-map file IO.

pub mod config;
pub mod depth_eval;
pub mod depth_io;
pub mod metrics;
pub mod runner;
pub mod scenario;
pub mod server;
pub mod simulation;
pub mod trace;

pub use runner::{run_scenario, RunOutput};
pub use scenario::Scenario;
