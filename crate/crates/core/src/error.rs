use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error in {source_name} at line {line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("mesh has no floor band")]
    NoFloor,
    #[error("grid has no navigable cells")]
    NoNavigableCells,
    #[error("point is not navigable: {0}")]
    NotNavigable(String),
    #[error("goal unreachable")]
    Unreachable,
    #[error("degenerate geometry: {0}")]
    Degenerate(String),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("dataset error: {0}")]
    Dataset(String),
    #[error("backend error: {0}")]
    Backend(String),
    #[error("response failed validation after {attempts} attempts: {last_error}")]
    RetriesExhausted { attempts: usize, last_error: String },
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
