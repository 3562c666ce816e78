//! Crate-wide error type.
//!
//! Errors carry a coarse category so the command-line layer can map failures
//! to distinct exit codes without string matching.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// File-system failure, annotated with the offending path.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Malformed or inconsistent input data (bad CSV cell, unsorted dates,
    /// non-finite values, misaligned lengths, ...).
    #[error("data error: {0}")]
    Data(String),

    /// Invalid configuration (unknown keys, out-of-range values, missing
    /// required settings such as the seed).
    #[error("config error: {0}")]
    Config(String),

    /// A model estimation failed (no start produced a finite objective,
    /// degenerate window, ...). Carries the model id for diagnostics.
    #[error("fit error in {model}: {message}")]
    Fit { model: String, message: String },

    /// A numerical routine failed to converge or produced an invalid value.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// A combination step could not produce weights.
    #[error("combination error: {0}")]
    Combination(String),

    /// A backtest could not be computed (e.g. sample too short).
    #[error("backtest error: {0}")]
    Backtest(String),

    /// Pipeline-level failure (window bookkeeping, predictor failure, ...).
    #[error("pipeline error: {0}")]
    Pipeline(String),
}

impl Error {
    /// Stable machine-readable category name.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Data(_) => "data",
            Error::Config(_) => "config",
            Error::Fit { .. } => "fit",
            Error::Numerical(_) => "numerical",
            Error::Combination(_) => "combination",
            Error::Backtest(_) => "backtest",
            Error::Pipeline(_) => "pipeline",
        }
    }

    /// Process exit code used by the CLI: 0 is success, each failure
    /// category gets a small distinct nonzero code.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Data(_) | Error::Io { .. } => 3,
            Error::Fit { .. } => 4,
            Error::Numerical(_) => 5,
            Error::Combination(_) => 6,
            Error::Backtest(_) => 7,
            Error::Pipeline(_) => 8,
        }
    }

    /// Shorthand constructor for fit errors.
    pub fn fit(model: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Fit {
            model: model.into(),
            message: message.into(),
        }
    }
}
