use std::fmt;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("autograd: {0}")]
    Autograd(String),
    #[error("malformed data: {0}")]
    Format(String),
    #[error("non-finite {what} at step {step}")]
    NonFinite { step: usize, what: String },
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn shape_err<T>(msg: impl fmt::Display) -> Result<T> {
    Err(Error::Shape(msg.to_string()))
}

pub(crate) fn invalid<T>(msg: impl fmt::Display) -> Result<T> {
    Err(Error::InvalidArgument(msg.to_string()))
}

/// Attaches a stage name to an error.
pub trait StageContext<T> {
    fn stage(self, name: &str) -> Result<T>;
}

impl<T> StageContext<T> for Result<T> {
    fn stage(self, name: &str) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage: name.to_string(),
            source: Box::new(e),
        })
    }
}
