//! One function per subcommand. Each returns the artifacts it wrote and an
//! exit code: 0 when every check passed, 1 otherwise.

use std::path::PathBuf;

use thiserror::Error;

use crate::config::ConfigError;
use crate::io::FormatError;

pub mod drift_sweep;
pub mod fsq_selftest;
pub mod grpo_train;
pub mod metrics;
pub mod rollout;

#[derive(Debug, Clone, PartialEq)]
pub struct CommandResult {
    pub exit_code: i32,
    pub artifacts: Vec<PathBuf>,
    pub summary: String,
}

impl CommandResult {
    pub fn new(passed: bool, artifacts: Vec<PathBuf>, summary: String) -> Self {
        CommandResult { exit_code: if passed { 0 } else { 1 }, artifacts, summary }
    }
}

#[derive(Debug, Error)]
pub enum CommandError {
    /// Bad flags or configuration; exit code 2.
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Core(#[from] tokenworld_core::Error),
}

impl CommandError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Usage(_) | CommandError::Config(_) => 2,
            CommandError::Format(_) | CommandError::Core(_) => 1,
        }
    }
}
