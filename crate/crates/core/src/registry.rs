//! Name-keyed registries of candidate extractors, tagger trainers and
//! product span taggers, so methods can be chosen at runtime.
//!
//! The token-graph extractor is registered here; model-backed entries are
//! added by the crates that implement them.

use std::collections::{BTreeMap, HashSet};
use std::path::PathBuf;

use crate::candidates::CandidateList;
use crate::clickgraph::ClickGraph;
use crate::error::{Error, Result};
use crate::nerc::ProductSpanTagger;
use crate::token_graph::extract_all;

type Factory<T, S> = Box<dyn Fn(&S) -> Result<Box<T>> + Send + Sync>;

struct Entry<T: ?Sized, S> {
    description: String,
    factory: Factory<T, S>,
}

/// Factories producing boxed `T` from settings `S`, keyed by name.
pub struct Registry<T: ?Sized, S> {
    entries: BTreeMap<String, Entry<T, S>>,
}

impl<T: ?Sized, S> Default for Registry<T, S> {
    fn default() -> Self {
        Registry {
            entries: BTreeMap::new(),
        }
    }
}

impl<T: ?Sized, S> Registry<T, S> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Fails if `name` is already taken.
    pub fn register<F>(&mut self, name: &str, description: &str, factory: F) -> Result<()>
    where
        F: Fn(&S) -> Result<Box<T>> + Send + Sync + 'static,
    {
        if self.entries.contains_key(name) {
            return Err(Error::InvalidArgument(format!("`{name}` is already registered")));
        }
        self.entries.insert(
            name.to_owned(),
            Entry {
                description: description.to_owned(),
                factory: Box::new(factory),
            },
        );
        Ok(())
    }

    pub fn create(&self, name: &str, settings: &S) -> Result<Box<T>> {
        match self.entries.get(name) {
            Some(entry) => (entry.factory)(settings),
            None => Err(Error::UnknownMethod {
                name: name.to_owned(),
                available: self.names().map(str::to_owned).collect(),
            }),
        }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// `(name, description)` pairs in name order.
    pub fn describe(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries
            .iter()
            .map(|(n, e)| (n.as_str(), e.description.as_str()))
    }
}

/// Inputs shared by every extraction method.
pub struct ExtractionInput<'a> {
    /// The cleaned click graph, optionally restricted to one category.
    pub graph: &'a ClickGraph,
    /// Stemmed prepositions.
    pub prepositions: &'a HashSet<String>,
}

pub trait CandidateExtractor: Send + Sync {
    fn extract(&self, input: &ExtractionInput<'_>) -> Result<CandidateList>;
}

/// Model files an extractor or tagger may need. Unused fields are ignored.
#[derive(Debug, Clone, Default)]
pub struct ModelSettings {
    pub checkpoint: Option<PathBuf>,
    pub pos_table: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
}

impl ModelSettings {
    /// The path in `field`, or an error naming the missing flag.
    pub fn require<'a>(field: &'a Option<PathBuf>, what: &str) -> Result<&'a PathBuf> {
        field
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument(format!("{what} is required for this method")))
    }
}

pub struct TrainSettings {
    /// Training data: a labeled-query file for the CNN; an IOB file, or a
    /// directory of `<category>.iob` files, for the LSTM-CRF.
    pub data: PathBuf,
    /// Click graph providing token-graph features.
    pub graph: Option<PathBuf>,
    pub pos_table: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    /// JSON model/optimizer configuration; defaults when absent.
    pub config: Option<PathBuf>,
    pub seed: u64,
    /// Overrides the epoch count of the configuration.
    pub epochs: Option<usize>,
    /// Categories left out of training (held out for evaluation).
    pub exclude_categories: Vec<String>,
}

impl TrainSettings {
    pub fn new(data: impl Into<PathBuf>, seed: u64) -> Self {
        TrainSettings {
            data: data.into(),
            graph: None,
            pos_table: None,
            embeddings: None,
            config: None,
            seed,
            epochs: None,
            exclude_categories: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    /// Serialized checkpoint, ready to be written to disk.
    pub checkpoint_json: String,
    /// Mean training loss of the last epoch.
    pub final_loss: f64,
}

pub trait TaggerTrainer: Send + Sync {
    fn train(&self, settings: &TrainSettings) -> Result<TrainedModel>;
}

pub type ExtractorRegistry = Registry<dyn CandidateExtractor, ModelSettings>;
pub type TrainerRegistry = Registry<dyn TaggerTrainer, ()>;
pub type SpanTaggerRegistry = Registry<dyn ProductSpanTagger, ModelSettings>;

/// One candidate per click-graph component.
#[derive(Debug, Clone, Copy, Default)]
pub struct TokenGraphExtractor;

impl CandidateExtractor for TokenGraphExtractor {
    fn extract(&self, input: &ExtractionInput<'_>) -> Result<CandidateList> {
        Ok(extract_all(input.graph, input.prepositions))
    }
}

/// Registries holding the methods this crate provides.
pub struct Registries {
    pub extractors: ExtractorRegistry,
    pub trainers: TrainerRegistry,
    pub span_taggers: SpanTaggerRegistry,
}

impl Default for Registries {
    fn default() -> Self {
        let mut extractors = ExtractorRegistry::new();
        extractors
            .register(
                "token-graph",
                "ratio of incoming to total adjacency weight per click-graph component",
                |_| Ok(Box::new(TokenGraphExtractor)),
            )
            .expect("fresh registry");
        Registries {
            extractors,
            trainers: TrainerRegistry::new(),
            span_taggers: SpanTaggerRegistry::new(),
        }
    }
}
