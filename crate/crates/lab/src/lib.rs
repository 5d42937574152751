//! Experiments, file formats and the command-line runner around [`wkde`].

pub mod cli;
pub mod config;
pub mod error;
pub mod harness;
pub mod output;

pub use config::{load_config, ExperimentConfig, Resolved};
pub use error::{LabError, Result};
pub use harness::{ExperimentResult, Outcome};
