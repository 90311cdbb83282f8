//! Configuration-driven experiments on top of `explosion-core`: each run
//! writes versioned CSVs, a `SCHEMA.md`, gnuplot scripts and a
//! `manifest.json` with content digests.

pub mod config;
pub mod experiments;
pub mod manifest;
pub mod plots;
pub mod runner;
pub mod table;

pub use config::{Case, ConfigError, Experiment, ExperimentConfig, Seed, Tolerances};
pub use manifest::{Assertion, OutputEntry, OutputKind, RunManifest, TaskRecord};
pub use plots::emit_plots;
pub use runner::{run, RunError};

/// Artifact version written into every CSV header and manifest.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
