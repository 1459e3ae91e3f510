use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("zero-degree node {0}")]
    ZeroDegreeNode(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("shift operator is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("eigendecomposition did not converge after {0} iterations")]
    NoConvergence(usize),

    #[error("missing eigendecomposition")]
    MissingEigendecomposition,

    #[error("response pole hit at lambda = {0}")]
    ResponsePoleHit(f64),

    #[error("singular system: S - {0} I is not invertible")]
    SingularPole(f64),

    #[error("pole {gamma} is within {margin:e} of diagonal entry {diag} of the shift")]
    PoleTooClose { gamma: f64, diag: f64, margin: f64 },

    #[error("edge-varying support violation at ({0}, {1})")]
    SupportViolation(usize, usize),

    #[error("invalid filter configuration: {0}")]
    InvalidFilter(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("stale tape: {0}")]
    StaleTape(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("no ratings in {0}")]
    NoRatings(PathBuf),

    #[error("unknown item {0}")]
    UnknownItem(u32),

    #[error("collision: agents {0} and {1} are coincident")]
    Collision(usize, usize),

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
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
