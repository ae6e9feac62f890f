//! Crate-wide error type with the diagnostics the CLI maps to exit codes.

use std::path::PathBuf;

use thiserror::Error;

/// Top-level error. `Parse`, `Schema` and `Physics` are all configuration
/// errors, kept separate so a user can tell a typo from an invalid setup.
#[derive(Debug, Error)]
pub enum Error {
    /// The scenario document could not be parsed at all.
    #[error("parse error: {0}")]
    Parse(String),

    /// The document parsed but does not match the scenario schema.
    #[error("schema violation: {0}")]
    Schema(String),

    /// The scenario is well-formed but physically invalid (collinear or
    /// duplicate beacons, gain bounds violated, optimum at a beacon, ...).
    #[error("physics violation: {0}")]
    Physics(String),

    /// Numerical failure while preparing a run (e.g. the reference solver
    /// did not converge on the beacon field).
    #[error("solver failure: {0}")]
    Solver(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors that should surface as a configuration problem.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Parse(_) | Error::Schema(_) | Error::Physics(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
