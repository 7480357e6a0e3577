use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("unknown joint `{0}`")]
    UnknownJoint(String),

    #[error("unknown link `{0}`")]
    UnknownLink(String),

    #[error("unknown camera `{0}`")]
    UnknownCamera(String),

    #[error("unknown object `{0}`")]
    UnknownObject(String),

    #[error("duplicate object name `{0}`")]
    DuplicateObject(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("zero-length vector")]
    ZeroVector,

    #[error("non-finite depth {0}")]
    NonFiniteDepth(f64),

    #[error("matrix is {rows}x{cols}; inverse needs a square matrix")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is rank deficient")]
    RankDeficient,

    #[error("{0} is disabled in the scene config")]
    Disabled(&'static str),

    #[error("target unreachable: residual {pos:.4} m / {rot:.4} rad")]
    Unreachable { pos: f64, rot: f64 },

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error("timed out after {0} s of simulated time")]
    Timeout(f64),

    #[error("ball not found in camera image")]
    BallNotFound,

    #[error("hand collided with the table during descent")]
    DescentCollision,

    #[error("log schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
