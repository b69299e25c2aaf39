//! Error types shared across the library.

use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violated its documented invariant.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Incompatible array or image dimensions.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Input data is malformed (non-finite entries, bad layout, ...).
    #[error("invalid data: {0}")]
    Data(String),

    /// Experiment or dataset configuration is inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// Classification could not produce a result (e.g. every block abstained).
    #[error("classification failed: {0}")]
    Classification(String),

    /// An I/O failure, annotated with the path involved.
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// A pipeline stage failed; names the stage so CLI errors stay actionable.
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Wraps an error with the name of the pipeline stage it occurred in.
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Error {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
