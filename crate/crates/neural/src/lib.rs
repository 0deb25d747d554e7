//! Neural product taggers with hand-written forward and backward passes:
//! a 1-D convolutional token classifier over POS and token-graph
//! features, and a bidirectional LSTM with a linear-chain CRF over IOB
//! tags. Both are deterministic for a fixed seed.

pub mod activation;
pub mod adam;
pub mod checkpoint;
pub mod cnn;
pub mod crf;
pub mod error;
pub mod gradcheck;
pub mod layers;
pub mod lstm;
pub mod lstm_crf;
pub mod methods;
pub mod params;
pub mod tensor;

pub use error::{NeuralError, Result};
pub use methods::{register_all, registries};
