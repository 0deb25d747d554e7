//! `pipeline --config FILE`: every stage in order, with file handoffs
//! under the output directory.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use ontoshop_core::candidates::CandidateList;
use ontoshop_core::clickgraph::{ClickGraph, CleanConfig};
use ontoshop_core::eval::{compare, precision_at_n, AnnotationSet, DEFAULT_MAX_N};
use ontoshop_core::ontology::Ontology;
use ontoshop_core::registry::{ExtractionInput, ModelSettings, TrainSettings};
use ontoshop_core::retrieval::{load_catalog, ScoreWeights, SkuIndex};
use ontoshop_core::Error;
use ontoshop_neural::cnn::CnnConfig;
use ontoshop_neural::lstm_crf::LstmCrfConfig;

use crate::commands::brand_lexicon;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub click_log: PathBuf,
    pub ontology: PathBuf,
    pub pos_table: PathBuf,
    pub embeddings: PathBuf,
    /// Labeled queries for the CNN.
    pub labeled: PathBuf,
    /// IOB file or directory of `<category>.iob` files for the LSTM-CRF.
    pub iob: PathBuf,
    /// Product annotations; enables the comparison report.
    #[serde(default)]
    pub annotations: Option<PathBuf>,
    /// SKU catalog; enables the index stage.
    #[serde(default)]
    pub catalog: Option<PathBuf>,
    /// Existing checkpoints are used as is; training runs otherwise.
    #[serde(default)]
    pub cnn_checkpoint: Option<PathBuf>,
    #[serde(default)]
    pub lstm_crf_checkpoint: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Restrict extraction and evaluation to one category.
    #[serde(default)]
    pub category: Option<String>,
    /// Categories left out of training.
    #[serde(default)]
    pub exclude_categories: Vec<String>,
    #[serde(default)]
    pub clean: CleanConfig,
    #[serde(default)]
    pub cnn: CnnConfig,
    #[serde(default)]
    pub lstm_crf: LstmCrfConfig,
    #[serde(default)]
    pub weights: ScoreWeights,
    #[serde(default = "default_max_n")]
    pub max_n: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_max_n() -> usize {
    DEFAULT_MAX_N
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let json = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: PipelineConfig = serde_json::from_str(&json).map_err(|e| {
            Error::format(format!("{}:{}:{}", path.display(), e.line(), e.column()), e.to_string())
        })?;
        // Relative paths are taken from the config file's directory.
        let base = path.parent().unwrap_or(Path::new(""));
        for p in config.paths_mut() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    fn paths_mut(&mut self) -> Vec<&mut PathBuf> {
        let mut out = vec![
            &mut self.click_log,
            &mut self.ontology,
            &mut self.pos_table,
            &mut self.embeddings,
            &mut self.labeled,
            &mut self.iob,
            &mut self.output_dir,
        ];
        out.extend(
            [
                &mut self.annotations,
                &mut self.catalog,
                &mut self.cnn_checkpoint,
                &mut self.lstm_crf_checkpoint,
            ]
            .into_iter()
            .flatten(),
        );
        out
    }

    /// Every input must exist before any stage runs.
    pub fn validate(&self) -> Result<()> {
        let inputs = [
            Some(&self.click_log),
            Some(&self.ontology),
            Some(&self.pos_table),
            Some(&self.embeddings),
            self.annotations.as_ref(),
            self.catalog.as_ref(),
            self.cnn_checkpoint.as_ref(),
            self.lstm_crf_checkpoint.as_ref(),
        ];
        for p in inputs.into_iter().flatten() {
            if !p.is_file() {
                return Err(Error::io(p, std::io::Error::from(std::io::ErrorKind::NotFound)).into());
            }
        }
        if self.cnn_checkpoint.is_none() && !self.labeled.is_file() {
            return Err(Error::io(&self.labeled, std::io::Error::from(std::io::ErrorKind::NotFound)).into());
        }
        if self.lstm_crf_checkpoint.is_none() && !self.iob.exists() {
            return Err(Error::io(&self.iob, std::io::Error::from(std::io::ErrorKind::NotFound)).into());
        }
        self.cnn.validate()?;
        self.lstm_crf.validate()?;
        self.weights.validate()?;
        Ok(())
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Stages: ingest, clean, train (unless checkpoints are given), extract
/// with every method, compare (with annotations), index (with a catalog).
pub fn run(config_path: &Path) -> Result<()> {
    let config = PipelineConfig::load(config_path)?;
    config.validate()?;
    let out = &config.output_dir;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let ontology = Ontology::load(&config.ontology)?;

    let raw = ClickGraph::from_tsv_path(&config.click_log)?;
    raw.save(out.join("graph.json"))?;
    let mut clean = config.clean.clone();
    clean.brand_lexicon.extend(brand_lexicon(&ontology));
    let graph = raw.clean(&clean);
    let graph_path = out.join("graph.clean.json");
    graph.save(&graph_path)?;
    eprintln!("clean: {} of {} queries kept", graph.queries().len(), raw.queries().len());

    let registries = ontoshop_neural::registries();
    let cnn_checkpoint = match &config.cnn_checkpoint {
        Some(p) => p.clone(),
        None => {
            let cfg = out.join("cnn.config.json");
            write(&cfg, serde_json::to_string_pretty(&config.cnn)?)?;
            let settings = TrainSettings {
                graph: Some(graph_path.clone()),
                pos_table: Some(config.pos_table.clone()),
                config: Some(cfg),
                exclude_categories: config.exclude_categories.clone(),
                ..TrainSettings::new(&config.labeled, config.seed)
            };
            let model = registries.trainers.create("cnn", &())?.train(&settings).context("training cnn")?;
            let path = out.join("cnn.ckpt.json");
            write(&path, &model.checkpoint_json)?;
            eprintln!("train cnn: final loss {}", model.final_loss);
            path
        }
    };
    let lstm_checkpoint = match &config.lstm_crf_checkpoint {
        Some(p) => p.clone(),
        None => {
            let cfg = out.join("lstm-crf.config.json");
            write(&cfg, serde_json::to_string_pretty(&config.lstm_crf)?)?;
            let settings = TrainSettings {
                embeddings: Some(config.embeddings.clone()),
                config: Some(cfg),
                exclude_categories: config.exclude_categories.clone(),
                ..TrainSettings::new(&config.iob, config.seed)
            };
            let model = registries
                .trainers
                .create("lstm-crf", &())?
                .train(&settings)
                .context("training lstm-crf")?;
            let path = out.join("lstm-crf.ckpt.json");
            write(&path, &model.checkpoint_json)?;
            eprintln!("train lstm-crf: final loss {}", model.final_loss);
            path
        }
    };

    let eval_graph = match &config.category {
        Some(c) => graph.restrict_to_category(c),
        None => graph,
    };
    let input = ExtractionInput {
        graph: &eval_graph,
        prepositions: ontology.prepositions(),
    };
    let methods = [
        ("token-graph", ModelSettings::default()),
        (
            "cnn",
            ModelSettings {
                checkpoint: Some(cnn_checkpoint),
                pos_table: Some(config.pos_table.clone()),
                embeddings: None,
            },
        ),
        (
            "lstm-crf",
            ModelSettings {
                checkpoint: Some(lstm_checkpoint),
                pos_table: None,
                embeddings: None,
            },
        ),
    ];
    let mut lists: Vec<(String, CandidateList)> = Vec::new();
    for (name, settings) in methods {
        let list = registries
            .extractors
            .create(name, &settings)?
            .extract(&input)
            .with_context(|| format!("extracting with `{name}`"))?;
        list.save(out.join(format!("candidates.{name}.csv")))?;
        eprintln!("extract {name}: {} candidates", list.len());
        lists.push((name.to_owned(), list));
    }

    if let Some(path) = &config.annotations {
        let ann = AnnotationSet::load(path)?;
        let curves = lists
            .iter()
            .map(|(name, list)| Ok((name.clone(), precision_at_n(list, &ann, config.max_n)?)))
            .collect::<Result<Vec<_>>>()?;
        let report = compare(&curves, config.max_n)?;
        write(&out.join("compare.csv"), report.to_csv_string())?;
        for (name, curve) in &curves {
            if let Some(p) = curve.points().last() {
                eprintln!("{name}: P@{} = {:.3}", p.n, p.precision);
            }
        }
    }

    if let Some(path) = &config.catalog {
        let index = SkuIndex::build(load_catalog(path)?, ontology)?;
        index.save(out.join("index.json"))?;
        write(&out.join("weights.json"), serde_json::to_string_pretty(&config.weights)?)?;
        eprintln!("index: {} skus", index.len());
    }
    Ok(())
}
