use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("loss must be a scalar, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),

    #[error("parameter {0} has no gradient")]
    MissingGradient(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("signal too short: {len} samples, need more than {needed}")]
    SignalTooShort { len: usize, needed: usize },

    #[error("frequency {freq_hz:.1} Hz is above the Nyquist limit {nyquist_hz:.1} Hz")]
    AboveNyquist { freq_hz: f64, nyquist_hz: f64 },

    #[error("stratification: {0}")]
    Stratification(String),

    #[error("config mismatch: {0}")]
    ConfigMismatch(String),

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("wav {path}: {source}")]
    Wav {
        path: PathBuf,
        #[source]
        source: hound::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape { op, detail: detail.into() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
