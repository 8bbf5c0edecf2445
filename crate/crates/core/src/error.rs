use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the analysis pipeline.
///
/// Variants split into two families: contract violations (bad input shapes,
/// degenerate statistics, malformed records) and I/O failures. The CLI maps
/// the former to exit code 1 and the latter to exit code 2.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("line {line}: duplicate timestamp {timestamp} for station {station_id}")]
    Duplicate {
        line: u64,
        station_id: String,
        timestamp: String,
    },

    #[error("no usable input rows")]
    EmptyInput,

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("imputation impossible: block {block} has no observed values")]
    ImputationImpossible { block: String },

    #[error("sample too small: need at least {needed}, got {got}")]
    SampleTooSmall { needed: usize, got: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("panel is empty: no reading of the series falls in any window")]
    EmptyPanel,

    #[error("missing month {0} in cluster reports")]
    MissingMonth(String),

    #[error("station {0} not found in metadata")]
    UnknownStation(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the filesystem rather than of the data.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io { .. } => true,
            Error::Csv(e) => e.is_io_error(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
