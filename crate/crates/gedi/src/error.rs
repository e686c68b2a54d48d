use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] gedi_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// `location` is `line N` for text formats and `byte N` for binary ones.
    #[error("{path}: parse error at {location}: {message}")]
    Parse { path: PathBuf, location: String, message: String },
    #[error("{path}: unsupported format: {message}")]
    UnsupportedFormat { path: PathBuf, message: String },
    #[error("{path}: checksum mismatch (stored {stored:08x}, computed {computed:08x})")]
    Checksum { path: PathBuf, stored: u32, computed: u32 },
    #[error("configuration: {0}")]
    Config(String),
    #[error("gradient check failed: {0}")]
    GradientCheck(String),
    #[error("could not reach the overlap target after {attempts} crop attempts")]
    OverlapUnreachable { attempts: usize },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse_line(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), location: format!("line {line}"), message: message.into() }
    }

    pub(crate) fn parse_byte(path: impl Into<PathBuf>, byte: usize, message: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), location: format!("byte {byte}"), message: message.into() }
    }

    /// Stable machine-readable name of the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Core(e) => e.kind(),
            Error::Io { .. } => "Io",
            Error::Parse { .. } => "ParseError",
            Error::UnsupportedFormat { .. } => "UnsupportedFormat",
            Error::Checksum { .. } => "ChecksumMismatch",
            Error::Config(_) => "InvalidConfig",
            Error::GradientCheck(_) => "GradientCheckFailed",
            Error::OverlapUnreachable { .. } => "OverlapUnreachable",
        }
    }
}
