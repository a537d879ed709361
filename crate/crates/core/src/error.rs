//! Error taxonomy shared across the workspace.
//!
//! The variants map onto the process exit codes used by the CLI: config
//! problems exit 2, everything else that fails a run exits 1.

use thiserror::Error;

/// Unified error type for all fallible operations in this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration: bad field values, unknown keys, unusable
    /// specs. These are caller mistakes detectable before any work starts.
    #[error("config error: {0}")]
    Config(String),

    /// Dimension mismatch between tensors, states, actions, or buffers.
    #[error("shape error: {0}")]
    Shape(String),

    /// Non-finite values encountered where finite math was required
    /// (exploding losses, NaN gradients, infinite inputs).
    #[error("numeric error: {0}")]
    Numeric(String),

    /// API misuse: stepping a finished episode, sampling an empty buffer,
    /// pushing inconsistent transitions.
    #[error("usage error: {0}")]
    Usage(String),

    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Run artifacts disagree in a way that makes comparison meaningless
    /// (different environments, different step grids).
    #[error("comparison error: {0}")]
    Comparison(String),

    /// Filesystem or serialization failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True when the error reflects a bad configuration rather than a
    /// failure during execution. The CLI maps this to exit code 2.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
