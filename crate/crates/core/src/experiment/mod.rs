//! Config-driven experiments: parsing, shipped presets and the runner used
//! by the command-line tool.

pub mod config;
pub mod presets;
pub mod runner;

pub use config::{parse, Diagnostic, ExperimentConfig, Ladder, Plan};
pub use presets::{preset, presets, Preset};
pub use runner::{execute, run, Outcome, RunRecord};
