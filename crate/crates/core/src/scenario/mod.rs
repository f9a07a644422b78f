//! Scenario configuration, the closed-loop world and the batch harnesses.

mod config;
mod harness;
mod log;
mod world;

pub use config::*;
pub use harness::*;
pub use log::*;
pub use world::*;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("invalid config `{path}`: {message}")]
    Invalid { path: String, message: String },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("{file} line {line}: {message}")]
    LogParse { file: String, line: usize, message: String },
    #[error("a seed is required")]
    MissingSeed,
    #[error("simulation fault: {0}")]
    Fault(String),
}
