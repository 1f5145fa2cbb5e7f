//! Standard-library companion to `ringcal-core`: JSON configs with unit
//! suffixes, seeded parallel experiment sweeps, CSV and matrix-market file
//! formats, and the `ringcal` command-line tool.

pub mod cli;
pub mod config;
pub mod demos;
pub mod harness;
pub mod io;
pub mod parallel;
pub mod units;

pub use config::{ConfigError, ExperimentConfig, Method, SweepValue, SweepVariable};
pub use harness::{run_sweep, run_trial, run_trial_with_seed, ExperimentRecord, SweepResult};
