//! File formats, configuration and parallel drivers around `spinbath-core`.
//!
//! The `spinbath` binary is a thin layer over this library; every output
//! it writes can be produced (and read back) from here.

pub mod config;
pub mod csvio;
pub mod parallel;

use std::path::PathBuf;

pub use config::{ConfigError, RunConfig};
pub use spinbath_core as core;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Config {
        path: PathBuf,
        #[source]
        source: ConfigError,
    },
    #[error("{}: expected header `{expected}`, found `{found}`", path.display())]
    Header {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error("{}: line {line} (data row {row}), column `{column}`: {message}", path.display())]
    Row {
        path: PathBuf,
        line: usize,
        row: usize,
        column: String,
        message: String,
    },
    #[error(transparent)]
    Core(#[from] spinbath_core::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Version string written into provenance headers.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
