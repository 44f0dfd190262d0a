//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration value or malformed config file.
    #[error("config error: {0}")]
    Config(String),

    /// A caller broke an interface contract (wrong action count, shape
    /// mismatch, stage/dimension mismatch).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Non-finite values encountered in state, parameters or losses.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// A required artifact (champion checkpoint, pool directory) is absent.
    #[error("missing artifact: {0}")]
    MissingArtifact(String),

    /// Checkpoint file is corrupt or has an incompatible format version.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// Champion selection could not proceed (e.g. empty pool after filters).
    #[error("selection error: {0}")]
    Selection(String),

    /// Iterative solver failed to meet its tolerance within budget.
    #[error("solver did not converge: {0}")]
    Solver(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
