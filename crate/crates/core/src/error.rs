use thiserror::Error;

/// Errors raised by the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("numerical overflow at step {step}: {what}")]
    NumericalOverflow { step: usize, what: String },

    #[error("gradient overflow at step {step}: {what}")]
    GradientOverflow { step: usize, what: String },

    #[error("training diverged at epoch {epoch}")]
    TrainingDiverged { epoch: usize },

    #[error("key generation failed: {0}")]
    Keygen(String),

    #[error("key integrity error: {0}")]
    KeyIntegrity(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by bad input or configuration rather than by the
    /// run itself.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Usage(_) | Error::Format(_) | Error::KeyIntegrity(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
