//! Monte-Carlo harness for the JACD solver: experiment configuration,
//! seeded paired-trial execution, CSV results, and oracle self-tests.
//! The `jacd` binary is a thin front end over this library.

pub mod config;
pub mod experiment;
pub mod output;
pub mod selftest;

pub use config::{ExperimentConfig, Method, Preset, Sweep};
pub use experiment::{run_experiment, RunError};
pub use output::{write_results, ResultTable, SummaryRow, TrialRow};
