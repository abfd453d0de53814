use thiserror::Error;

pub type Result<T> = std::result::Result<T, LrdError>;

#[derive(Debug, Error)]
pub enum LrdError {
    /// Arguments outside the operation's domain (bad mode, shape mismatch, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid regularization or solver configuration.
    #[error("config error: {0}")]
    Config(String),

    /// Malformed file contents.
    #[error("format error: {0}")]
    Format(String),

    /// A slice system could not be solved to a finite result.
    #[error("numerical failure in mode {mode}, slice {slice}: {reason}")]
    Numerical { mode: usize, slice: usize, reason: String },

    /// The objective became NaN or infinite.
    #[error("non-finite objective after outer iteration {iteration}: {detail}")]
    NonFiniteObjective { iteration: usize, detail: String },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl LrdError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        LrdError::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        LrdError::Config(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        LrdError::Format(msg.into())
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            LrdError::Domain(_) | LrdError::Config(_) => 2,
            LrdError::Format(_) | LrdError::Io(_) => 3,
            LrdError::Numerical { .. } | LrdError::NonFiniteObjective { .. } => 4,
        }
    }
}
