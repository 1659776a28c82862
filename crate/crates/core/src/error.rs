use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {file}: {message}")]
    Parse { file: String, message: String },

    #[error("invalid instance: {0}")]
    Validation(String),

    #[error("invalid solution: {0}")]
    InvalidSolution(String),

    #[error("invalid configuration key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("unknown station id {0}")]
    UnknownStation(i64),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("no path between customer node {from} and site node {to}")]
    Unreachable { from: u64, to: u64 },

    #[error("distance cache checksum mismatch (stored {stored:#010x}, computed {computed:#010x})")]
    Checksum { stored: u32, computed: u32 },

    #[error("distance cache is {found_rows}x{found_cols}, expected {rows}x{cols}")]
    Dimension {
        rows: usize,
        cols: usize,
        found_rows: usize,
        found_cols: usize,
    },

    #[error("malformed distance cache: {0}")]
    CacheFormat(String),

    #[error("invalid move: {0}")]
    InvalidMove(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(file: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            file: file.into(),
            message: message.to_string(),
        }
    }


    /// Whether the error stems from bad user input (files, ids, configuration)
    /// rather than an environment failure.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
