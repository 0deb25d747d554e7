use std::path::PathBuf;

use crate::ontology::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A file or record did not match its schema. `location` names the
    /// file plus line/row/field when known.
    #[error("{location}: {message}")]
    Format { location: String, message: String },

    #[error("ontology failed validation: {}", summarize(.0))]
    Invalid(Vec<Violation>),

    #[error("unknown concept `{0}`")]
    UnknownConcept(String),

    #[error("query node {0} has no edges")]
    IsolatedNode(usize),

    #[error("token graph is empty")]
    EmptyComponent,

    #[error("missing annotations for {} term(s): {}", .0.len(), .0.join(", "))]
    MissingAnnotation(Vec<String>),

    #[error("unknown method `{name}` (available: {})", .available.join(", "))]
    UnknownMethod { name: String, available: Vec<String> },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Errors raised by pluggable extractors/trainers living in other crates.
    #[error(transparent)]
    Other(Box<dyn std::error::Error + Send + Sync>),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            location: location.into(),
            message: message.into(),
        }
    }
}

fn summarize(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
