use thiserror::Error;

/// Errors produced by the registration pipeline.
#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("empty reference model")]
    EmptyReferenceModel,

    #[error("no facade evidence")]
    NoFacadeEvidence,

    #[error("degenerate detection: {0}")]
    DegenerateDetection(String),

    #[error("{what} at byte offset {offset}")]
    Format { offset: usize, what: String },

    #[error("{what} at line {line}")]
    Parse { line: usize, what: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn format(offset: usize, what: impl Into<String>) -> Self {
        Error::Format {
            offset,
            what: what.into(),
        }
    }

    pub(crate) fn parse(line: usize, what: impl Into<String>) -> Self {
        Error::Parse {
            line,
            what: what.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
