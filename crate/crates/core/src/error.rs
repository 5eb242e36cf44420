use thiserror::Error;

use crate::corpus::CorpusError;
use crate::eval::EvalError;
use crate::kg::KgError;
use crate::schema::SchemaError;
use crate::seq::SeqError;
use crate::sgns::SgnsError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Crate-wide error. Each stage has its own error type; this wraps them so
/// the pipeline and CLI can classify failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Sgns(#[from] SgnsError),
    #[error(transparent)]
    Kg(#[from] KgError),
    #[error(transparent)]
    Seq(#[from] SeqError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("config: {0}")]
    Config(String),
    #[error("{path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("stage `{stage}` failed")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

/// Failure class, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numeric,
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// The message followed by every underlying cause.
    pub fn report(&self) -> String {
        let mut out = self.to_string();
        let mut cur = std::error::Error::source(self);
        while let Some(e) = cur {
            out.push_str(": ");
            out.push_str(&e.to_string());
            cur = e.source();
        }
        out
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Sgns(e) => sgns_class(e),
            Error::Kg(e) => kg_class(e),
            Error::Seq(e) => seq_class(e),
            Error::Config(_)
            | Error::Corpus(CorpusError::UnknownStrategy(_))
            | Error::Eval(EvalError::Unknown { .. }) => ErrorClass::Usage,
            Error::Stage { source, .. } => source.class(),
            _ => ErrorClass::Data,
        }
    }
}

impl ErrorClass {
    /// Class of a single error if it is one of this crate's types. Stage
    /// errors that surface unwrapped (say from a direct `sgns::train` call)
    /// classify the same as when wrapped in [`Error`].
    pub fn of(e: &(dyn std::error::Error + 'static)) -> Option<ErrorClass> {
        if let Some(e) = e.downcast_ref::<Error>() {
            Some(e.class())
        } else if let Some(e) = e.downcast_ref::<SgnsError>() {
            Some(sgns_class(e))
        } else if let Some(e) = e.downcast_ref::<KgError>() {
            Some(kg_class(e))
        } else if let Some(e) = e.downcast_ref::<SeqError>() {
            Some(seq_class(e))
        } else if let Some(e) = e.downcast_ref::<CorpusError>() {
            Some(match e {
                CorpusError::UnknownStrategy(_) => ErrorClass::Usage,
                _ => ErrorClass::Data,
            })
        } else if let Some(e) = e.downcast_ref::<EvalError>() {
            Some(match e {
                EvalError::Unknown { .. } => ErrorClass::Usage,
                _ => ErrorClass::Data,
            })
        } else if e.downcast_ref::<SchemaError>().is_some() || e.downcast_ref::<FormatError>().is_some() {
            Some(ErrorClass::Data)
        } else {
            None
        }
    }
}

fn sgns_class(e: &SgnsError) -> ErrorClass {
    match e {
        SgnsError::NonFinite(_) => ErrorClass::Numeric,
        SgnsError::InvalidConfig(_) => ErrorClass::Usage,
        _ => ErrorClass::Data,
    }
}

fn kg_class(e: &KgError) -> ErrorClass {
    match e {
        KgError::NonFinite(_) => ErrorClass::Numeric,
        KgError::InvalidConfig(_) => ErrorClass::Usage,
        _ => ErrorClass::Data,
    }
}

fn seq_class(e: &SeqError) -> ErrorClass {
    match e {
        SeqError::NonFinite(_) => ErrorClass::Numeric,
        SeqError::InvalidConfig(_) => ErrorClass::Usage,
        _ => ErrorClass::Data,
    }
}

/// Errors reading the tool's own artifact files.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{what}: truncated file (expected {expected}, found {found})")]
    Truncated {
        what: &'static str,
        expected: String,
        found: String,
    },
    #[error("{what}: bad header `{header}`")]
    BadHeader { what: &'static str, header: String },
    #[error("{what}: unsupported format version {found} (expected {expected})")]
    Version {
        what: &'static str,
        found: u32,
        expected: u32,
    },
    #[error("{what}: line {line}: {message}")]
    Line {
        what: &'static str,
        line: usize,
        message: String,
    },
}
