//! Error types shared across the library.

use thiserror::Error;

/// Errors produced by simulator, model, attack and data operations.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid wire indices, mismatched shapes, bad construction arguments.
    #[error("configuration error: {0}")]
    Config(String),

    /// An operation was asked for something this implementation does not do.
    #[error("capability error: {0}")]
    Capability(String),

    /// Input that cannot be processed (e.g. an all-zero image has no direction).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// A size limit was exceeded (register capacity, density-matrix cap).
    #[error("capacity error: {0}")]
    Capacity(String),

    /// Labels or values outside the declared domain.
    #[error("data error: {0}")]
    Data(String),

    /// Malformed on-disk containers (IDX files, checkpoints, attack sets).
    #[error("format error: {0}")]
    Format(String),

    /// Training diverged or otherwise failed.
    #[error("training error: {0}")]
    Training(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable machine-readable category, used by the CLI for exit codes.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Capability(_) => "capability",
            Error::DegenerateInput(_) => "degenerate-input",
            Error::Capacity(_) => "capacity",
            Error::Data(_) => "data",
            Error::Format(_) => "format",
            Error::Training(_) => "training",
            Error::Io(_) => "io",
        }
    }
}
