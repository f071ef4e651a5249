use thiserror::Error;

/// Errors produced by the harness.
#[derive(Debug, Error)]
pub enum SeqEvalError {
    /// A caller-supplied value violated a precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A structured text file could not be parsed; names the first bad record.
    #[error("format error at {path}:{line}: {message}")]
    Format {
        path: String,
        line: usize,
        message: String,
    },

    /// An operation was called out of protocol order.
    #[error("protocol error: {0}")]
    Protocol(String),

    /// A run or experiment configuration is inconsistent.
    #[error("config error: {0}")]
    Config(String),

    /// Score normalization is impossible because the reference scores coincide.
    #[error("degenerate reference scores: {0}")]
    DegenerateReference(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl SeqEvalError {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        SeqEvalError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, SeqEvalError>;
