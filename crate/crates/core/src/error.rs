use std::path::PathBuf;

use crate::geometry::Timestamp;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Two poses or a pose and a point cloud do not chain through a shared frame.
    #[error("frame error: {0}")]
    Frame(String),

    /// A query timestamp lies outside the span covered by a pose chain.
    #[error("timestamp {t} outside pose chain span [{start}, {end}]")]
    OutOfRange {
        t: Timestamp,
        start: Timestamp,
        end: Timestamp,
    },

    #[error("pixel ({u}, {v}) outside {width}x{height} image")]
    Bounds {
        u: f64,
        v: f64,
        width: usize,
        height: usize,
    },

    #[error("class counts are all zero")]
    DegenerateCounts,

    #[error("invalid value: {0}")]
    Invalid(String),

    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl ToString) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
