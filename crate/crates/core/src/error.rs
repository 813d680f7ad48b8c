// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use crate::model_io::ModelIoError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors produced by the engine, the event pipeline and the trainer.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: &'static str,
        expected: String,
        actual: String,
    },

    #[error("non-finite value in {0}")]
    Numeric(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed record {record}: {message}")]
    Parse { record: usize, message: String },

    #[error("record {record}: coordinate ({x}, {y}) outside {width}x{height} sensor")]
    OutOfBounds {
        record: usize,
        x: u64,
        y: u64,
        width: u16,
        height: u16,
    },

    #[error("record {record}: timestamp {t} precedes previous timestamp {prev}")]
    Order { record: usize, prev: u64, t: u64 },

    #[error("{mode} mode is not supported here")]
    UnsupportedMode { mode: crate::neuron::Mode },

    #[error("training diverged at epoch {epoch}, batch {batch}: {detail}")]
    Divergence {
        epoch: usize,
        batch: usize,
        detail: String,
    },

    #[error("dataset has {available} sequences, batch needs {requested}")]
    InsufficientData { available: usize, requested: usize },

    #[error(transparent)]
    Model(#[from] ModelIoError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn shape(context: &'static str, expected: impl ToString, actual: impl ToString) -> Self {
        Error::Shape {
            context,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    /// Broad category, used by front ends to pick an exit status.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::UnsupportedMode { .. } => ErrorKind::Config,
            Error::Numeric(_) | Error::Divergence { .. } => ErrorKind::Numeric,
            _ => ErrorKind::Data,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
}

pub(crate) fn ensure_finite(values: &[f32], what: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric(what.to_string()))
    }
}
