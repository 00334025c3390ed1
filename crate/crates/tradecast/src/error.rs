use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Write(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("missing required column `{0}`")]
    MissingHeader(&'static str),
    #[error("{rejected} of {total} rows are malformed (first: line {first_line}: {first_reason})")]
    TooManyRejected {
        rejected: usize,
        total: usize,
        first_line: u64,
        first_reason: String,
    },
    #[error("no record matches the filter {0}")]
    EmptyResult(String),
    #[error("records mix {0}")]
    MixedSlice(&'static str),
    #[error("series is empty")]
    EmptySeries,
    #[error("{0}")]
    BadSeries(String),
    #[error("model file: {0}")]
    ModelFormat(String),
    #[error("plot: {0}")]
    Plot(String),
    #[error(transparent)]
    Model(#[from] tradecast_core::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 for usage errors, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 2,
            _ => 1,
        }
    }
}
