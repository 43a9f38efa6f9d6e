//! Benchmark runner: configuration, history export and plots.

pub mod config;
pub mod manifest;
pub mod plot;
pub mod run;

pub use config::{RunArgs, RunSettings};
pub use manifest::RunManifest;
pub use run::{execute, RunOutcome};

/// Exit code for a usage or configuration error.
pub const EXIT_USAGE: i32 = 2;
/// Exit code for a solver failure; partial outputs are kept.
pub const EXIT_SOLVER: i32 = 1;
