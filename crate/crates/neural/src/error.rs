pub type Result<T, E = NeuralError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum NeuralError {
    #[error("{op}: expected shape {expected:?}, found {found:?}")]
    Shape {
        op: &'static str,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("training set is empty")]
    EmptyDataset,

    #[error("sequence is empty")]
    EmptySequence,

    #[error("tag index {0} is not one of O=0, B=1, I=2")]
    BadTag(usize),

    #[error("tag path has a forbidden transition into position {position}")]
    InvalidPath { position: usize },

    #[error("checkpoint {location}: {message}")]
    Checkpoint { location: String, message: String },

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] ontoshop_core::Error),
}

impl NeuralError {
    pub(crate) fn shape(op: &'static str, expected: &[usize], found: &[usize]) -> Self {
        NeuralError::Shape {
            op,
            expected: expected.to_vec(),
            found: found.to_vec(),
        }
    }

    pub(crate) fn checkpoint(location: impl Into<String>, message: impl Into<String>) -> Self {
        NeuralError::Checkpoint {
            location: location.into(),
            message: message.into(),
        }
    }
}

impl From<NeuralError> for ontoshop_core::Error {
    fn from(e: NeuralError) -> Self {
        match e {
            NeuralError::Core(inner) => inner,
            other => ontoshop_core::Error::Other(Box::new(other)),
        }
    }
}
