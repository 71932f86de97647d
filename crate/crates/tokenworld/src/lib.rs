//! Configuration, file formats and the command line around `tokenworld-core`.

pub mod cli;
pub mod commands;
pub mod config;
pub mod io;

pub use commands::{CommandError, CommandResult};
pub use config::{parse_config, RunConfig};
