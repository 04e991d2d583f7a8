//! Experiment harness: JSON configs in, per-seed CSV metrics and table
//! dumps out.

pub mod compare;
pub mod config;
pub mod run;

pub use compare::{compare, CompareReport};
pub use config::{Algorithm, ExperimentConfig, OUTPUT_ROOT_VAR};
pub use run::{run, RunOutcome};
