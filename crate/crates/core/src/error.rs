use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Matrix or snapshot dimensions disagree.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A caller broke an API contract (stale cache, unfrozen stage, mixed stages...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Non-finite values reached an optimizer or a network.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Input outside the mathematical domain of a formula.
    #[error("domain error: {0}")]
    Domain(String),

    /// Synthetic fleet generation could not satisfy its constraints.
    #[error("generation error: {0}")]
    Generation(String),

    /// Malformed CSV, manifest or wire payload.
    #[error("parse error in {file}:{line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },

    /// Invalid configuration value.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A pipeline stage failed; wraps the underlying error with the stage name.
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(file: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            file: file.into(),
            line,
            message: message.into(),
        }
    }

    pub fn in_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping `Stage` wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for errors caused by user input or configuration rather than a
    /// runtime failure during training.
    pub fn is_user_error(&self) -> bool {
        matches!(
            self.root(),
            Error::Parse { .. } | Error::Config(_) | Error::Io { .. } | Error::Generation(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
