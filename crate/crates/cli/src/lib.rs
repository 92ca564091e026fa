//! Experiment runner: sweeps, verification, bounds and schedules.

pub mod commands;
pub mod spec;

pub use commands::{cmd_bounds, cmd_run, cmd_schedule, cmd_verify};
pub use spec::{RunMode, RunSpec, SpecError};
