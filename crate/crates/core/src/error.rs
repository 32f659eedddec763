use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index {index:?} outside grid of dims {dims:?}")]
    OutOfBounds { index: [i64; 3], dims: [usize; 3] },

    #[error("point ({:.4}, {:.4}, {:.4}) outside the grid bounding box", point[0], point[1], point[2])]
    PointOutside { point: [f64; 3] },

    #[error("plane unreachable: {remaining} plane voxels never accepted")]
    PlaneUnreachable { remaining: usize },

    #[error("contour detection failed: {0}")]
    Detection(String),

    #[error("path network failed: {failed} of {total} paths did not converge")]
    Network { failed: usize, total: usize },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: msg.into(),
        }
    }

    /// Process exit code for this error: 2 config, 3 numeric/solver, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Io(_) | Error::Format { .. } => 4,
            Error::Stage { source, .. } => source.exit_code(),
            _ => 3,
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
