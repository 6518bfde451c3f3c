use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("clip too short: {samples} samples, need at least {needed}")]
    TooShort { samples: usize, needed: usize },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("parse error in {source_name} at row {row}: {message}")]
    Parse {
        source_name: String,
        row: usize,
        message: String,
    },

    #[error("missing landmark indices {missing:?}")]
    MissingLandmarks { missing: Vec<u32> },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("measurement {am}: {source}")]
    Measurement {
        am: String,
        #[source]
        source: Box<Error>,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("out of range: {0}")]
    Range(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("training diverged at epoch {epoch} (loss {loss})")]
    Divergence { epoch: usize, loss: f64 },

    #[error("degenerate pair: chance-level MSE is zero in repeat {repeat}")]
    DegeneratePair { repeat: usize },

    #[error("pair ({phoneme}, {am}) repeat {repeat}: {source}")]
    Pair {
        phoneme: String,
        am: String,
        repeat: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("run failed: {0}")]
    Run(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerical procedure itself (divergence, a
    /// fully failed run) as opposed to bad input data.
    pub fn is_runtime(&self) -> bool {
        match self {
            Error::Divergence { .. } | Error::Run(_) => true,
            Error::Pair { source, .. } | Error::Measurement { source, .. } => source.is_runtime(),
            _ => false,
        }
    }
}
