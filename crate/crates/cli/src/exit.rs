use ontoshop_core::Error;
use ontoshop_neural::NeuralError;

pub const USAGE: u8 = 1;
pub const IO: u8 = 2;
pub const VALIDATION: u8 = 3;
pub const FORMAT: u8 = 4;

/// Validation failure reported by a command itself (e.g. `ontology
/// validate` listing violations).
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ValidationFailed(pub String);

fn core_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => IO,
        Error::Format { .. } => FORMAT,
        Error::Invalid(_)
        | Error::UnknownConcept(_)
        | Error::IsolatedNode(_)
        | Error::EmptyComponent
        | Error::MissingAnnotation(_) => VALIDATION,
        Error::UnknownMethod { .. } | Error::InvalidArgument(_) => USAGE,
        Error::Other(inner) => match inner.downcast_ref::<NeuralError>() {
            Some(n) => neural_code(n),
            None => VALIDATION,
        },
    }
}

fn neural_code(e: &NeuralError) -> u8 {
    match e {
        NeuralError::Checkpoint { .. } => FORMAT,
        NeuralError::Config(_) => USAGE,
        NeuralError::Core(inner) => core_code(inner),
        _ => VALIDATION,
    }
}

/// The first typed error in the chain decides the code.
pub fn code_for(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(c) = cause.downcast_ref::<Error>() {
            return core_code(c);
        }
        if let Some(n) = cause.downcast_ref::<NeuralError>() {
            return neural_code(n);
        }
        if cause.downcast_ref::<ValidationFailed>().is_some() {
            return VALIDATION;
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return IO;
        }
    }
    VALIDATION
}
