use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate vector: norm is zero")]
    DegenerateVector,

    #[error("empty input")]
    EmptyInput,

    #[error("shape error: {0}")]
    Shape(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("format error at line {line}: {message}")]
    Format { line: u64, message: String },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("record count mismatch: {images} images vs {labels} labels")]
    CountMismatch { images: usize, labels: usize },

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("insufficient classes: {0}")]
    InsufficientClasses(String),

    #[error("label {label} out of range for {classes} classes")]
    Label { label: usize, classes: usize },

    #[error("anchor {anchor} has no negatives (single-class batch?)")]
    NoNegatives { anchor: usize },

    #[error("view pairing error: {0}")]
    ViewPairing(String),

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("forward cache does not match parameters or gradients: {0}")]
    CacheMismatch(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(line: u64, message: impl Into<String>) -> Self {
        Error::Format {
            line,
            message: message.into(),
        }
    }
}
