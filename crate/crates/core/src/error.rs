use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Record {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{0}")]
    Invalid(String),

    #[error("unknown example id(s): {0:?}")]
    UnknownExamples(Vec<String>),

    #[error("reserved alias name `{0}`")]
    ReservedAlias(String),

    #[error("unbalanced quote at offset {0}")]
    UnbalancedQuote(usize),

    #[error("type error: {0}")]
    Type(String),

    #[error("s-expression syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("filter bank eliminated all candidates")]
    NoSurvivors(Box<crate::filterbank::FilterReport>),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn invalid(message: impl Into<String>) -> Self {
        Error::Invalid(message.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    /// Errors caused by bad input (files, configs, records) rather than by a
    /// failure while running a stage.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::NoSurvivors(_) => false,
            Error::Io { source, .. } => source.kind() == std::io::ErrorKind::NotFound,
            _ => true,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
