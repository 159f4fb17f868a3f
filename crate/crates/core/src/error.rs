use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Operand shapes do not fit the operation.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// A sequence, window or batch that must be nonempty was empty.
    #[error("empty input: {0}")]
    EmptyInput(String),

    /// Caller-supplied data is out of range or otherwise invalid.
    #[error("invalid input: {0}")]
    Input(String),

    /// A value fell outside the domain of a function (e.g. log of a non-positive number).
    #[error("domain error: {0}")]
    Domain(String),

    /// API misuse, such as running backward on a non-scalar or twice on one tape.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("{}: parse error at {offset}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        offset: String,
        msg: String,
    },

    #[error("{}: {source}", path.display())]
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

    pub(crate) fn parse(path: impl Into<PathBuf>, offset: impl ToString, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            offset: offset.to_string(),
            msg: msg.into(),
        }
    }

    /// Process exit code for the command-line tool: 2 for configuration
    /// problems, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            _ => 1,
        }
    }
}
