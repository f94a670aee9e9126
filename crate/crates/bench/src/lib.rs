//! Experiment harness for comparing input pixel patterns on a liquid state
//! machine: load a dataset, encode the selected pixels as spikes, run the
//! reservoir, train linear readouts and report accuracy, runtime and
//! storage.

pub mod config;
pub mod data;
pub mod error;
pub mod experiment;
pub mod pipeline;
pub mod results;

pub use config::ExperimentConfig;
pub use error::{BenchError, Result, Stage};
pub use experiment::{compare_patterns, run_experiment, Comparison};
pub use results::{emit_results, ExperimentResult, OutputFormat};
