//! Registry entries for the two neural taggers: candidate extractors,
//! trainers, and product span taggers for query annotation.

use std::path::Path;

use ontoshop_core::candidates::CandidateList;
use ontoshop_core::clickgraph::ClickGraph;
use ontoshop_core::embeddings::EmbeddingTable;
use ontoshop_core::features::FeatureContext;
use ontoshop_core::iob::{load_iob, IobSequence};
use ontoshop_core::labeled::load_labeled;
use ontoshop_core::nerc::ProductSpanTagger;
use ontoshop_core::pos::PosTable;
use ontoshop_core::registry::{
    CandidateExtractor, ExtractionInput, ModelSettings, Registries, TaggerTrainer, TrainSettings,
    TrainedModel,
};
use ontoshop_core::{Error, Result};

use crate::checkpoint::Checkpoint;
use crate::cnn::{build_examples, CnnConfig, CnnTagger};
use crate::lstm_crf::{LstmCrfConfig, LstmCrfTagger};

/// A click graph from JSON (as written by `clean`) or a raw TSV click log.
pub fn load_graph(path: &Path) -> Result<ClickGraph> {
    if path.extension().is_some_and(|e| e == "json") {
        ClickGraph::load(path)
    } else {
        ClickGraph::from_tsv_path(path)
    }
}

fn load_config<C: for<'de> serde::Deserialize<'de> + Default>(path: Option<&Path>) -> Result<C> {
    let Some(path) = path else {
        return Ok(C::default());
    };
    let json = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&json).map_err(|e| {
        Error::format(format!("{}:{}:{}", path.display(), e.line(), e.column()), e.to_string())
    })
}

/// Groups consecutive indices into half-open ranges.
fn runs(flags: impl IntoIterator<Item = bool>) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    let mut len = 0;
    for (i, f) in flags.into_iter().enumerate() {
        match (f, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((s, i));
                start = None;
            }
            _ => {}
        }
        len = i + 1;
    }
    if let Some(s) = start {
        out.push((s, len));
    }
    out
}

pub struct CnnMethod {
    pub tagger: CnnTagger,
    pub pos: PosTable,
}

impl CnnMethod {
    pub fn load(settings: &ModelSettings) -> Result<Self> {
        let ckpt = Checkpoint::load(ModelSettings::require(&settings.checkpoint, "--checkpoint")?)?;
        Ok(CnnMethod {
            tagger: CnnTagger::from_checkpoint(&ckpt)?,
            pos: PosTable::load(ModelSettings::require(&settings.pos_table, "--pos")?)?,
        })
    }
}

impl CandidateExtractor for CnnMethod {
    fn extract(&self, input: &ExtractionInput<'_>) -> Result<CandidateList> {
        let context = FeatureContext::from_graph(input.graph);
        let queries: Vec<Vec<String>> = input.graph.queries().iter().map(|q| q.tokens.clone()).collect();
        Ok(self.tagger.extract_candidates(&queries, &self.pos, &context)?)
    }
}

impl ProductSpanTagger for CnnMethod {
    /// Runs of tokens at or above the threshold; the query is scored
    /// against a token graph of itself alone.
    fn product_spans(&self, tokens: &[String]) -> Vec<(usize, usize)> {
        match self.tagger.predict_tokens(tokens, &self.pos, &FeatureContext::default()) {
            Ok(p) => runs(p.into_iter().map(|p| p >= self.tagger.config.threshold)),
            Err(_) => Vec::new(),
        }
    }
}

pub struct LstmCrfMethod {
    pub tagger: LstmCrfTagger,
}

impl LstmCrfMethod {
    pub fn load(settings: &ModelSettings) -> Result<Self> {
        let ckpt = Checkpoint::load(ModelSettings::require(&settings.checkpoint, "--checkpoint")?)?;
        Ok(LstmCrfMethod {
            tagger: LstmCrfTagger::from_checkpoint(&ckpt)?,
        })
    }
}

impl CandidateExtractor for LstmCrfMethod {
    fn extract(&self, input: &ExtractionInput<'_>) -> Result<CandidateList> {
        let queries: Vec<Vec<String>> = input.graph.queries().iter().map(|q| q.tokens.clone()).collect();
        Ok(self.tagger.extract_candidates(&queries)?)
    }
}

impl ProductSpanTagger for LstmCrfMethod {
    fn product_spans(&self, tokens: &[String]) -> Vec<(usize, usize)> {
        if tokens.is_empty() {
            return Vec::new();
        }
        self.tagger
            .decode(tokens)
            .map(|(seq, _)| seq.product_ranges())
            .unwrap_or_default()
    }
}

pub struct CnnTrainer;

impl TaggerTrainer for CnnTrainer {
    fn train(&self, s: &TrainSettings) -> Result<TrainedModel> {
        let mut config: CnnConfig = load_config(s.config.as_deref())?;
        config.seed = s.seed;
        if let Some(e) = s.epochs {
            config.epochs = e;
        }
        let pos = PosTable::load(ModelSettings::require(&s.pos_table, "--pos")?)?;
        let context = match &s.graph {
            Some(path) => FeatureContext::from_graph(&load_graph(path)?),
            None => FeatureContext::default(),
        };
        let data: Vec<_> = load_labeled(&s.data)?
            .into_iter()
            .filter(|q| !s.exclude_categories.contains(&q.category))
            .collect();
        let examples = build_examples(&data, &pos, &context, config.max_len)?;
        let (tagger, final_loss) = CnnTagger::train(&examples, config)?;
        Ok(TrainedModel {
            checkpoint_json: tagger.to_checkpoint().to_json_string(),
            final_loss,
        })
    }
}

/// IOB sequences from a file, or from every `<category>.iob` in a
/// directory except the excluded categories (in name order).
pub fn load_iob_data(path: &Path, exclude: &[String]) -> Result<Vec<IobSequence>> {
    if !path.is_dir() {
        return load_iob(path);
    }
    let mut files: Vec<_> = std::fs::read_dir(path)
        .map_err(|e| Error::io(path, e))?
        .map(|entry| entry.map(|e| e.path()).map_err(|e| Error::io(path, e)))
        .collect::<Result<_>>()?;
    files.retain(|p| {
        p.extension().is_some_and(|e| e == "iob")
            && p.file_stem()
                .and_then(|s| s.to_str())
                .is_some_and(|s| !exclude.iter().any(|c| c == s))
    });
    files.sort();
    let mut out = Vec::new();
    for f in files {
        out.extend(load_iob(&f)?);
    }
    Ok(out)
}

pub struct LstmCrfTrainer;

impl TaggerTrainer for LstmCrfTrainer {
    fn train(&self, s: &TrainSettings) -> Result<TrainedModel> {
        let mut config: LstmCrfConfig = load_config(s.config.as_deref())?;
        config.seed = s.seed;
        if let Some(e) = s.epochs {
            config.epochs = e;
        }
        let embeddings = EmbeddingTable::load(ModelSettings::require(&s.embeddings, "--embeddings")?)?;
        let data = load_iob_data(&s.data, &s.exclude_categories)?;
        let mut tagger = LstmCrfTagger::new(&embeddings, config)?;
        let history = tagger.train(&data)?;
        Ok(TrainedModel {
            checkpoint_json: tagger.to_checkpoint().to_json_string(),
            final_loss: history.last().copied().unwrap_or(f64::NAN),
        })
    }
}

/// Adds the `cnn` and `lstm-crf` methods to every registry.
pub fn register_all(r: &mut Registries) -> Result<()> {
    r.extractors.register(
        "cnn",
        "convolutional per-token classifier over POS, token-graph and position features",
        |s| Ok(Box::new(CnnMethod::load(s)?)),
    )?;
    r.extractors.register(
        "lstm-crf",
        "product spans decoded by a word-embedding BiLSTM-CRF",
        |s| Ok(Box::new(LstmCrfMethod::load(s)?)),
    )?;
    r.trainers.register("cnn", "labeled queries + POS table + click graph", |_| {
        Ok(Box::new(CnnTrainer))
    })?;
    r.trainers.register("lstm-crf", "IOB queries + word embeddings", |_| {
        Ok(Box::new(LstmCrfTrainer))
    })?;
    r.span_taggers.register("cnn", "tokens flagged by the CNN tagger", |s| {
        Ok(Box::new(CnnMethod::load(s)?))
    })?;
    r.span_taggers.register("lstm-crf", "IOB spans from the BiLSTM-CRF", |s| {
        Ok(Box::new(LstmCrfMethod::load(s)?))
    })?;
    Ok(())
}

/// Default registries with the neural methods added.
pub fn registries() -> Registries {
    let mut r = Registries::default();
    register_all(&mut r).expect("names are distinct");
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn runs_of_flags() {
        assert_eq!(runs([true, true, false, true]), vec![(0, 2), (3, 4)]);
        assert_eq!(runs([false, false]), vec![]);
        assert_eq!(runs(Vec::<bool>::new()), vec![]);
    }

    #[test]
    fn all_methods_registered() {
        let r = registries();
        assert_eq!(r.extractors.names().collect::<Vec<_>>(), vec!["cnn", "lstm-crf", "token-graph"]);
        assert_eq!(r.trainers.names().collect::<Vec<_>>(), vec!["cnn", "lstm-crf"]);
        assert!(r.span_taggers.contains("lstm-crf"));
        assert!(r.extractors.create("cnn", &ModelSettings::default()).is_err());
    }
}
