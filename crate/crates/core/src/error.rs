use thiserror::Error;

/// Errors raised while parsing an index or container file.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormatError {
    #[error("bad magic: expected {expected:?}")]
    BadMagic { expected: &'static str },
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("stream truncated at byte {offset}")]
    Truncated { offset: usize },
    #[error("{what} code {value} out of range (limit {limit}) at byte {offset}")]
    CodeOutOfRange {
        what: &'static str,
        value: u64,
        limit: u64,
        offset: usize,
    },
    #[error("invalid header: {0}")]
    InvalidHeader(String),
    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),
}

impl FormatError {
    /// Stable numeric code per failure kind.
    pub fn code(&self) -> u32 {
        match self {
            FormatError::BadMagic { .. } => 1,
            FormatError::UnsupportedVersion(_) => 2,
            FormatError::Truncated { .. } => 3,
            FormatError::CodeOutOfRange { .. } => 4,
            FormatError::InvalidHeader(_) => 5,
            FormatError::TrailingBytes(_) => 6,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("zero-norm vector where a nonzero one is required")]
    ZeroNorm,
    #[error("matrix is not positive definite (degenerate cluster)")]
    NotPositiveDefinite,
    #[error("non-positive quadratic coefficient w = {0}")]
    NonConvexQuadratic(f64),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numeric kernels rather than of the inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite | Error::NonConvexQuadratic(_) | Error::ZeroNorm
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
