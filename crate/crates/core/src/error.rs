use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("feature width k = {k} must exceed beacon dimension d = {d}")]
    FeatureWidth { k: usize, d: usize },

    #[error("parameter {0} has no gradient")]
    MissingGradient(String),

    #[error("non-finite training loss at epoch {epoch} (loss = {loss})")]
    NonFiniteLoss { epoch: usize, loss: f32 },

    #[error("missing file {}", path.display())]
    MissingFile { path: PathBuf },

    #[error("{}: truncated blob, expected {expected} bytes but found {found}", path.display())]
    Truncated {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("{}: shape mismatch: {detail}", path.display())]
    ShapeMismatch { path: PathBuf, detail: String },

    #[error("{}: invalid manifest: {detail}", path.display())]
    Manifest { path: PathBuf, detail: String },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        let path = path.into();
        if source.kind() == io::ErrorKind::NotFound {
            Error::MissingFile { path }
        } else {
            Error::Io { path, source }
        }
    }
}
