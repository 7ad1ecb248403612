//! Error type shared across the crate.
//!
//! Every error maps onto one of three process exit codes (besides success):
//! `2` for usage / invalid-argument problems, `4` for configuration or
//! metadata mismatches (e.g. feeding a model features built with different
//! hashing parameters), and `3` for everything that went wrong with the data
//! itself (unreadable files, malformed rows, corrupt model files).

use std::path::PathBuf;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes surfaced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller passed a value outside the documented range (bad segment
    /// count, zero-length window, unknown threshold mode, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Underlying I/O failure, annotated with the path when known.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// An input CSV is missing one of the required header columns.
    #[error("{path}: missing required column `{column}`")]
    MissingColumn { path: PathBuf, column: String },

    /// A CSV row failed validation (wrong field count, unparsable value...).
    #[error("{path}:{line}: {message}")]
    BadRow {
        path: PathBuf,
        line: u64,
        message: String,
    },

    /// Packet capture could not be parsed at the container level.
    #[error("pcap error in {path}: {message}")]
    Pcap { path: PathBuf, message: String },

    /// Generic data-level failure that is not tied to a single row.
    #[error("data error: {0}")]
    Data(String),

    /// Stored metadata disagrees with what the current invocation expects,
    /// e.g. a model trained on a different feature layout.
    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),

    /// A model file declares a format version this build cannot read.
    #[error("unsupported model format version {found} (this build reads version {supported})")]
    ModelVersion { found: u32, supported: u32 },

    /// A model file is structurally invalid.
    #[error("corrupt model file {path}: {message}")]
    CorruptModel { path: PathBuf, message: String },
}

impl Error {
    /// Process exit code this error maps to (`0` is success, never returned
    /// here). Usage errors are `2` to match the CLI parser's own convention.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) => 2,
            Error::ConfigMismatch(_) | Error::ModelVersion { .. } => 4,
            _ => 3,
        }
    }

    /// Helper to build an [`Error::Io`] with path context.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
