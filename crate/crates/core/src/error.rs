use std::path::PathBuf;

use crate::model::Pair;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("record {index}: pair {pair} is outside the {rows}x{cols} task")]
    PairOutOfBounds {
        index: usize,
        pair: Pair,
        rows: usize,
        cols: usize,
    },

    #[error("dimension mismatch: expected {expected_rows}x{expected_cols}, found {rows}x{cols}")]
    DimensionMismatch {
        expected_rows: usize,
        expected_cols: usize,
        rows: usize,
        cols: usize,
    },

    #[error("value {value} at ({row},{col}) is outside [0,1]")]
    ValueOutOfRange { row: usize, col: usize, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matches overlap on {0}")]
    Overlap(Pair),

    #[error("{0} is not a subset of the second match")]
    NotSubset(Pair),

    #[error("timestamp {found} does not advance past {last}")]
    TimestampRegression { last: f64, found: f64 },

    #[error("calibrated estimation requires {0}")]
    MissingCalibrator(&'static str),

    #[error("training diverged at epoch {epoch}: {detail}")]
    Diverged { epoch: usize, detail: String },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("task bundle {dir} is missing: {}", missing.join(", "))]
    IncompleteBundle { dir: PathBuf, missing: Vec<String> },

    #[error("calibrator artifact version {found} is not supported (expected {expected})")]
    ArtifactVersion { found: u32, expected: u32 },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
