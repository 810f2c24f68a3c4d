use std::path::PathBuf;

use thiserror::Error;

use crate::model::WaveLabel;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid wave parameters: {0}")]
    InvalidWave(String),

    #[error("invalid beat: {0}")]
    InvalidBeat(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("a beat generator needs an R wave")]
    MissingRWave,

    #[error("observed signal is constant; variance explained is undefined")]
    UndefinedVariance,

    #[error("no fitted component qualifies as an R wave")]
    Unfittable,

    #[error("beat {beat} cannot be segmented: {reason}")]
    Segmentation { beat: usize, reason: String },

    #[error("sampling frequency is required to convert a tolerance in milliseconds")]
    MissingSamplingFrequency,

    #[error("unknown wave labels: {}", .0.join(", "))]
    UnknownLabels(Vec<String>),

    #[error("config {path}:{line}: {message}")]
    Config {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("wave {0} has no parameters")]
    AbsentWave(WaveLabel),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
