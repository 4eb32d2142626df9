use std::path::PathBuf;

use thiserror::Error;

/// Everything that can go wrong inside the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: dimension mismatch, left is {left:?}, right is {right:?}")]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is not symmetric (max |a_ij - a_ji| = {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is not square ({0}x{1})")]
    NotSquare(usize, usize),

    #[error("underdetermined system: need at least {needed} points, got {got}")]
    Underdetermined { needed: usize, got: usize },

    #[error("rank-deficient design matrix (column {0})")]
    RankDeficient(usize),

    #[error("eigen solver did not converge after {0} sweeps")]
    NoConvergence(usize),

    #[error("line {line}: clip `{clip_id}`: field `{field}`: {message}")]
    Schema {
        line: usize,
        clip_id: String,
        field: String,
        message: String,
    },

    #[error("clip `{clip_id}` has {tracks} tracks but only {capacity} slots; raise the presence threshold or M_max")]
    TooManyTracks {
        clip_id: String,
        tracks: usize,
        capacity: usize,
    },

    #[error("checkpoint mismatch: {0}")]
    Checkpoint(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by bad data or files rather than numerics.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Schema { .. }
                | Error::TooManyTracks { .. }
                | Error::Checkpoint(_)
                | Error::Io { .. }
                | Error::Json(_)
                | Error::InvalidInput(_)
                | Error::Underdetermined { .. }
                | Error::RankDeficient(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
