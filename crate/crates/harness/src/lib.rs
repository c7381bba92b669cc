//! Experiment harness for the Rao-Blackwellized planners on the
//! localization benchmark: configuration, closed-loop episodes, filter and
//! planner sweeps, consistency checks, and result writers.

pub mod bench;
pub mod config;
pub mod episode;
pub mod error;
pub mod output;
pub mod stats;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
