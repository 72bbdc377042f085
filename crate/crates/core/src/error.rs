use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("singular system: {0}")]
    SingularSystem(String),
    #[error("corrupt codes: {0}")]
    CorruptCodes(String),
    #[error("file format: {0}")]
    FileFormat(String),
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Prepends a context label (an input path, a set index) to the message,
    /// preserving the error kind where it carries one.
    pub fn prefixed(self, ctx: &str) -> Error {
        match self {
            Error::InvalidInput(m) => Error::InvalidInput(format!("{ctx}: {m}")),
            Error::InvalidConfig(m) => Error::InvalidConfig(format!("{ctx}: {m}")),
            Error::DimensionMismatch(m) => Error::DimensionMismatch(format!("{ctx}: {m}")),
            Error::SingularSystem(m) => Error::SingularSystem(format!("{ctx}: {m}")),
            Error::CorruptCodes(m) => Error::CorruptCodes(format!("{ctx}: {m}")),
            Error::FileFormat(m) => Error::FileFormat(format!("{ctx}: {m}")),
            Error::UndefinedMetric(m) => Error::UndefinedMetric(format!("{ctx}: {m}")),
            Error::Io(e) => Error::FileFormat(format!("{ctx}: {e}")),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
