use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("moment order {available} is too small, need at least {required}")]
    MomentOrder { required: usize, available: usize },

    #[error("grid mismatch: {0} cells vs {1} cells")]
    GridMismatch(usize, usize),

    #[error("malformed trajectory: {0}")]
    Trajectory(String),

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::GridMismatch(..) | Error::Trajectory(_) => 2,
            Error::Numerical(_) | Error::MomentOrder { .. } => 3,
            Error::Io { .. } => 4,
        }
    }
}
