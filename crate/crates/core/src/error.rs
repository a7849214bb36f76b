use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The weights handed to a solver (or to a centroid update) sum to
    /// (almost) zero, so the weighted problem carries no information.
    #[error("weight sum {sum:e} is too small for a weighted estimate")]
    WeightSum { sum: f64 },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    /// Normal equations are singular because part of the graph is not tied
    /// to the anchored vertex through positively weighted edges.
    #[error("rank-deficient normal equations: vertices {vertices:?} are disconnected from the anchor")]
    RankDeficient { vertices: Vec<usize> },

    #[error("solver failed at robust iteration {iteration}: {source}")]
    Solver {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: unsupported format: {message}")]
    Unsupported { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
