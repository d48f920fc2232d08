//! Experiment harness: configuration, training commands, sweeps and output.

pub mod config;
pub mod models;
pub mod record;
pub mod sweep;
pub mod verify;

pub use config::{ExperimentConfig, Scenario};
pub use record::{to_csv, write_csv, Stat, SweepRecord};
