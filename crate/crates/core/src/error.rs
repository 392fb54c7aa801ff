use std::path::PathBuf;

use crate::model::ClassKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unknown {kind} class `{code}` (valid: {valid})")]
    UnknownClass {
        code: String,
        kind: ClassKind,
        valid: String,
    },

    #[error("{}line {line}: {reason}", .file.as_ref().map(|f| format!("{}: ", f.display())).unwrap_or_default())]
    Parse {
        file: Option<PathBuf>,
        line: usize,
        reason: String,
    },

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid manifest: {0}")]
    Manifest(String),

    #[error("bit `{bit_id}`: green is exclusive with every other cause")]
    GreenConflict { bit_id: String },

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("length mismatch: {left} predictions vs {right} ground-truth entries")]
    LengthMismatch { left: usize, right: usize },

    #[error("shape mismatch: {samples} samples vs {labels} labels")]
    ShapeMismatch { samples: usize, labels: usize },

    #[error("feature dimension mismatch: model expects {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("impurity of an empty label set is undefined")]
    EmptySet,

    #[error("no class has ground-truth boxes")]
    NoGroundTruth,

    #[error("invalid model file: {0}")]
    Model(String),
}

impl Error {
    pub(crate) fn parse(line: usize, reason: impl Into<String>) -> Self {
        Error::Parse {
            file: None,
            line,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Attach a file path to a parse error that does not carry one yet.
    pub fn in_file(self, path: impl Into<PathBuf>) -> Self {
        match self {
            Error::Parse {
                file: None,
                line,
                reason,
            } => Error::Parse {
                file: Some(path.into()),
                line,
                reason,
            },
            other => other,
        }
    }
}
