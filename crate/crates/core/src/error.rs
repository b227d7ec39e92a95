use std::path::PathBuf;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("empty vocabulary after min_count filtering")]
    EmptyVocabulary,

    #[error("insufficient context: no sentence has two in-vocabulary tokens")]
    InsufficientContext,

    #[error("zero-norm vector")]
    ZeroNorm,

    #[error("OOV: {0:?} is not in the vocabulary")]
    OutOfVocabulary(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("degenerate labels: both classes are required")]
    DegenerateLabels,

    #[error("AUC undefined: both classes are required")]
    AucUndefined,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("incompatible artifact: {0}")]
    Incompatible(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: u64, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
