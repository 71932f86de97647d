//! File formats: PGM/PPM frames, CSV tables, action range tables and token sequences.

use std::path::{Path, PathBuf};

use thiserror::Error;

pub mod actions;
pub mod pnm;
pub mod table;
pub mod tokens;

pub use actions::{read_action_table, write_action_table};
pub use pnm::{read_frames_dir, read_pnm, write_frames, write_pnm};
pub use table::{fmt_f64, write_csv};
pub use tokens::{read_sequence, write_sequence};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Malformed { path: PathBuf, message: String },
    #[error("{path}: unsupported PGM variant {magic}")]
    Unsupported { path: PathBuf, magic: String },
    #[error("{path}: {source}")]
    Core { path: PathBuf, source: tokenworld_core::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FormatError + '_ {
    move |source| FormatError::Io { path: path.to_path_buf(), source }
}

pub(crate) fn malformed(path: &Path, message: impl Into<String>) -> FormatError {
    FormatError::Malformed { path: path.to_path_buf(), message: message.into() }
}
