//! Error type shared across the crate.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Malformed caller input: bad shapes, bad config values, unknown tokens.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A JSONL record failed to parse or validate.
    #[error("line {line}: {msg}")]
    Jsonl { line: usize, msg: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Training produced a non-finite loss.
    #[error("training diverged: {0}")]
    Divergence(String),

    /// An iterative method hit its iteration cap.
    #[error("no convergence: {0}")]
    NonConvergence(String),

    /// Rejection sampling exhausted its attempt budget.
    #[error("sampling failed: {0}")]
    Sampling(String),

    /// Checkpoint and corpus vocabularies disagree.
    #[error("vocabulary mismatch: {0}")]
    VocabMismatch(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for errors caused by bad user input rather than a failed computation.
    /// The CLI maps these to exit code 2, everything else to 1.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_) | Error::Jsonl { .. } | Error::Io(_) | Error::VocabMismatch(_)
        )
    }
}
