use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the numeric engine, the data loaders and the run tooling.
#[derive(Debug, Error)]
pub enum Error {
    /// Tensor extents disagree with what an operation requires.
    #[error("dimension error in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An architecture or run configuration is internally inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("pyramid flavor error: expected {expected}, got {got}")]
    Flavor {
        expected: &'static str,
        got: &'static str,
    },

    #[error("backward already ran on this tape; reset it before differentiating again")]
    BackwardTwice,

    #[error("non-finite gradient in parameter `{param}`")]
    NonFiniteGradient { param: String },

    #[error("non-finite loss at iteration {iteration}")]
    NonFiniteLoss { iteration: usize },

    #[error("bad magic number in {path}: expected {expected:#010x}, found {found:#010x}")]
    BadMagic {
        path: PathBuf,
        expected: u32,
        found: u32,
    },

    #[error("truncated file {path}: needed {needed} bytes at offset {offset}, file has {len}")]
    Truncated {
        path: PathBuf,
        offset: u64,
        needed: u64,
        len: u64,
    },

    #[error("count mismatch: {images} images vs {labels} labels")]
    CountMismatch { images: usize, labels: usize },

    #[error("missing data file: {0}")]
    MissingData(PathBuf),

    /// A checkpoint or exported file does not follow its format.
    #[error("format error: {0}")]
    Format(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image encoding error: {0}")]
    Image(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dim(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Dimension {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Error class used for process exit codes and FFI status codes.
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Dimension { .. }
            | Error::InvalidArgument(_)
            | Error::Flavor { .. }
            | Error::BackwardTwice
            | Error::Usage(_) => ErrorClass::Usage,
            Error::Config(_) => ErrorClass::Config,
            Error::BadMagic { .. }
            | Error::Truncated { .. }
            | Error::CountMismatch { .. }
            | Error::MissingData(_) => ErrorClass::Data,
            Error::Format(_) => ErrorClass::Format,
            Error::Io { .. } | Error::Image(_) => ErrorClass::Io,
            Error::NonFiniteGradient { .. } | Error::NonFiniteLoss { .. } => ErrorClass::Numeric,
        }
    }
}

/// Coarse error families, each mapped to a distinct process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Config,
    Data,
    Format,
    Io,
    Numeric,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Usage => 2,
            ErrorClass::Config => 3,
            ErrorClass::Data => 4,
            ErrorClass::Io => 5,
            ErrorClass::Numeric => 6,
            ErrorClass::Format => 7,
        }
    }
}
