//! Search-side product ontology toolkit.
//!
//! Click logs become a bipartite [`ClickGraph`](clickgraph::ClickGraph),
//! which is cleaned and split into components; each component yields a
//! product candidate through its [`TokenGraph`](token_graph::TokenGraph).
//! Learned products feed an [`Ontology`](ontology::Ontology) that drives
//! query annotation ([`nerc`]) and filter-and-boost retrieval
//! ([`retrieval`]). [`eval`] scores candidate lists and [`synth`]
//! produces seeded data with known answers.

pub mod candidates;
pub mod clickgraph;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod features;
pub mod iob;
pub mod labeled;
pub mod nerc;
pub mod ontology;
pub mod pos;
pub mod registry;
pub mod retrieval;
pub mod synth;
pub mod text;
pub mod token_graph;

pub use error::{Error, Result};
