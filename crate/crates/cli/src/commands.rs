use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use ontoshop_core::candidates::CandidateList;
use ontoshop_core::clickgraph::{ClickGraph, CleanConfig};
use ontoshop_core::eval::{compare, precision_at_n, AnnotationSet, PrecisionCurve};
use ontoshop_core::nerc::{annotate, apply_default_product, ProductSpanTagger};
use ontoshop_core::ontology::{ConceptKind, Ontology, OntologyDocument};
use ontoshop_core::registry::{ExtractionInput, ModelSettings, TrainSettings};
use ontoshop_core::retrieval::{load_catalog, write_results_csv, ScoreWeights, SkuIndex};
use ontoshop_core::synth::{generate, GeneratorConfig};
use ontoshop_neural::methods::load_graph;

use crate::exit::ValidationFailed;
use crate::pipeline;

#[derive(Parser, Debug)]
#[command(name = "ontoshop", version, about = "Learn a product ontology from click logs and use it for search")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build a click graph from a TSV click log.
    Ingest {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Drop light edges, broad queries and brand-only queries.
    Clean {
        #[arg(long)]
        graph: PathBuf,
        /// Cleaning thresholds (JSON); defaults when absent.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Adds the names and synonyms of its brands to the brand lexicon.
        #[arg(long)]
        ontology: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract product candidates with a registered method.
    Extract(ExtractArgs),
    /// Train a tagger and write its checkpoint.
    Train(TrainArgs),
    /// Label the tokens of a query against an ontology (JSON).
    Annotate {
        #[arg(long)]
        ontology: PathBuf,
        #[arg(long)]
        query: String,
        #[command(flatten)]
        tagger: TaggerArgs,
    },
    /// Validate a catalog against an ontology and write a search index.
    Index {
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long)]
        ontology: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank indexed SKUs for a query (CSV).
    Search {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        query: String,
        #[arg(short, long, default_value_t = 10)]
        k: usize,
        /// Score weights (JSON); defaults when absent.
        #[arg(long)]
        weights: Option<PathBuf>,
        #[command(flatten)]
        tagger: TaggerArgs,
    },
    /// Precision@n of candidate lists.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Synthetic data.
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Ontology files.
    #[command(subcommand)]
    Ontology(OntologyCommand),
    /// Run ingest, clean, training, extraction and evaluation from one
    /// configuration file.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
    },
    /// List the registered methods.
    Methods,
}

#[derive(Args, Debug)]
pub struct ExtractArgs {
    /// Method name, e.g. token-graph, cnn, lstm-crf.
    pub method: String,
    /// Cleaned click graph (JSON) or raw click log (TSV).
    #[arg(long)]
    pub graph: PathBuf,
    /// Restrict the graph to one category first.
    #[arg(long)]
    pub category: Option<String>,
    /// Source of the preposition list; built-in list when absent.
    #[arg(long)]
    pub ontology: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Candidates CSV; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
pub struct ModelArgs {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// POS table (TSV).
    #[arg(long)]
    pub pos: Option<PathBuf>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
}

impl ModelArgs {
    fn settings(&self) -> ModelSettings {
        ModelSettings {
            checkpoint: self.checkpoint.clone(),
            pos_table: self.pos.clone(),
            embeddings: self.embeddings.clone(),
        }
    }
}

#[derive(Args, Debug)]
pub struct TaggerArgs {
    /// Span tagger consulted when the ontology finds no product.
    #[arg(long)]
    pub tagger: Option<String>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Trainer name: cnn or lstm-crf.
    pub method: String,
    /// Labeled queries (cnn) or IOB file / directory (lstm-crf).
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 17)]
    pub seed: u64,
    /// Click graph for token-graph features (cnn).
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long)]
    pub pos: Option<PathBuf>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Model configuration (JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Category to leave out of training; repeatable.
    #[arg(long = "exclude-category")]
    pub exclude_categories: Vec<String>,
}

#[derive(Subcommand, Debug)]
pub enum EvalCommand {
    /// CSV `n,hits,precision` for one candidate list.
    Precision {
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long, default_value_t = 500)]
        max_n: usize,
    },
    /// CSV `n,<method>...` aligning several candidate lists.
    Compare {
        /// `name=path` pairs; repeatable.
        #[arg(long = "method", required = true, value_parser = parse_named_path)]
        methods: Vec<(String, PathBuf)>,
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long, default_value_t = 500)]
        max_n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
pub enum SynthCommand {
    /// Write a synthetic dataset to a directory.
    Gen {
        /// Generator configuration (JSON); defaults when absent.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
pub enum OntologyCommand {
    /// Check an ontology file; violations go to standard error.
    Validate { file: PathBuf },
}

fn parse_named_path(s: &str) -> std::result::Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => {
            Ok((name.to_owned(), PathBuf::from(path)))
        }
        _ => Err(format!("expected NAME=PATH, got `{s}`")),
    }
}

/// Writes to `path`, or to standard output when absent.
pub fn with_output<F>(path: Option<&Path>, f: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    match path {
        Some(p) => {
            let file = File::create(p).map_err(|e| ontoshop_core::Error::io(p, e))?;
            let mut w = BufWriter::new(file);
            f(&mut w)?;
            w.flush().map_err(|e| ontoshop_core::Error::io(p, e))?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = stdout.lock();
            f(&mut w)?;
            w.flush().map_err(|e| ontoshop_core::Error::io("<stdout>", e))?;
        }
    }
    Ok(())
}

fn load_json<T: for<'de> serde::Deserialize<'de>>(path: &Path) -> Result<T> {
    let json = std::fs::read_to_string(path).map_err(|e| ontoshop_core::Error::io(path, e))?;
    serde_json::from_str(&json).map_err(|e| {
        ontoshop_core::Error::format(format!("{}:{}:{}", path.display(), e.line(), e.column()), e.to_string())
            .into()
    })
}

/// Brand names and synonyms of an ontology.
pub fn brand_lexicon(ontology: &Ontology) -> impl Iterator<Item = String> + '_ {
    ontology
        .concepts()
        .filter(|c| c.kind == ConceptKind::Brand)
        .flat_map(|c| std::iter::once(c.name.clone()).chain(c.synonyms.iter().cloned()))
}

fn span_tagger(args: &TaggerArgs) -> Result<Option<Box<dyn ProductSpanTagger>>> {
    let Some(name) = &args.tagger else {
        return Ok(None);
    };
    let registries = ontoshop_neural::registries();
    Ok(Some(registries.span_taggers.create(name, &args.model.settings())?))
}

pub fn curve_csv(curve: &PrecisionCurve, w: &mut dyn Write) -> Result<()> {
    writeln!(w, "n,hits,precision")?;
    for p in curve.points() {
        writeln!(w, "{},{},{}", p.n, p.hits, p.precision)?;
    }
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest { log, out } => {
            let graph = ClickGraph::from_tsv_path(&log)?;
            graph.save(&out)?;
            eprintln!(
                "{} queries, {} skus, {} edges",
                graph.queries().len(),
                graph.skus().len(),
                graph.edges().len()
            );
        }
        Command::Clean {
            graph,
            config,
            ontology,
            out,
        } => {
            let mut config: CleanConfig = match config {
                Some(p) => load_json(&p)?,
                None => CleanConfig::default(),
            };
            if let Some(p) = ontology {
                let o = Ontology::load(&p)?;
                config.brand_lexicon.extend(brand_lexicon(&o));
            }
            let before = load_graph(&graph)?;
            let after = before.clean(&config);
            after.save(&out)?;
            eprintln!(
                "kept {} of {} queries, {} of {} edges",
                after.queries().len(),
                before.queries().len(),
                after.edges().len(),
                before.edges().len()
            );
        }
        Command::Extract(args) => {
            let list = extract(&args)?;
            with_output(args.out.as_deref(), |w| Ok(list.write_csv(w)?))?;
        }
        Command::Train(args) => {
            let registries = ontoshop_neural::registries();
            let trainer = registries.trainers.create(&args.method, &())?;
            let settings = TrainSettings {
                graph: args.graph,
                pos_table: args.pos,
                embeddings: args.embeddings,
                config: args.config,
                epochs: args.epochs,
                exclude_categories: args.exclude_categories,
                ..TrainSettings::new(args.data, args.seed)
            };
            let model = trainer.train(&settings)?;
            std::fs::write(&args.out, &model.checkpoint_json)
                .map_err(|e| ontoshop_core::Error::io(&args.out, e))?;
            eprintln!("final training loss {}", model.final_loss);
        }
        Command::Annotate {
            ontology,
            query,
            tagger,
        } => {
            let ontology = Ontology::load(&ontology)?;
            let tagger = span_tagger(&tagger)?;
            let ann = apply_default_product(&annotate(&query, &ontology, tagger.as_deref()), &ontology);
            let json = serde_json::to_string_pretty(&ann.to_json())?;
            with_output(None, |w| Ok(writeln!(w, "{json}")?))?;
        }
        Command::Index {
            catalog,
            ontology,
            out,
        } => {
            let index = SkuIndex::build(load_catalog(&catalog)?, Ontology::load(&ontology)?)?;
            index.save(&out)?;
            eprintln!("indexed {} skus", index.len());
        }
        Command::Search {
            index,
            query,
            k,
            weights,
            tagger,
        } => {
            let index = SkuIndex::load(&index)?;
            let weights: ScoreWeights = match weights {
                Some(p) => load_json(&p)?,
                None => ScoreWeights::default(),
            };
            weights.validate()?;
            let tagger = span_tagger(&tagger)?;
            let found = index.search_query(&query, tagger.as_deref(), &weights, k);
            if found.fallback {
                eprintln!("no product recognized; ranked by title overlap");
            }
            with_output(None, |w| Ok(write_results_csv(&found.results, w)?))?;
        }
        Command::Eval(EvalCommand::Precision {
            candidates,
            annotations,
            max_n,
        }) => {
            let curve = precision_at_n(
                &CandidateList::load(&candidates)?,
                &AnnotationSet::load(&annotations)?,
                max_n,
            )?;
            with_output(None, |w| curve_csv(&curve, w))?;
        }
        Command::Eval(EvalCommand::Compare {
            methods,
            annotations,
            max_n,
            out,
        }) => {
            let ann = AnnotationSet::load(&annotations)?;
            let curves = methods
                .iter()
                .map(|(name, path)| {
                    let list = CandidateList::load(path)?;
                    Ok((name.clone(), precision_at_n(&list, &ann, max_n)?))
                })
                .collect::<Result<Vec<_>>>()?;
            let report = compare(&curves, max_n)?;
            with_output(out.as_deref(), |w| Ok(report.write_csv(w)?))?;
        }
        Command::Synth(SynthCommand::Gen { config, seed, out }) => {
            let mut config: GeneratorConfig = match config {
                Some(p) => GeneratorConfig::load(&p)?,
                None => GeneratorConfig::default(),
            };
            if let Some(s) = seed {
                config.seed = s;
            }
            config.validate()?;
            let data = generate(&config)?;
            data.write_to(&out)?;
            eprintln!("{} click rows, {} labeled queries", data.clicks.len(), data.labeled.len());
        }
        Command::Ontology(OntologyCommand::Validate { file }) => {
            let json = std::fs::read_to_string(&file).map_err(|e| ontoshop_core::Error::io(&file, e))?;
            let doc: OntologyDocument = serde_json::from_str(&json).map_err(|e| {
                ontoshop_core::Error::format(
                    format!("{}:{}:{}", file.display(), e.line(), e.column()),
                    e.to_string(),
                )
            })?;
            let ontology = Ontology::new(doc);
            let violations = ontology.validate();
            if !violations.is_empty() {
                for v in &violations {
                    eprintln!("{v}");
                }
                return Err(ValidationFailed(format!("{} violation(s)", violations.len())).into());
            }
            with_output(None, |w| Ok(writeln!(w, "ok: {} concepts", ontology.len())?))?;
        }
        Command::Pipeline { config } => pipeline::run(&config)?,
        Command::Methods => {
            let r = ontoshop_neural::registries();
            with_output(None, |w| {
                for (kind, entries) in [
                    ("extract", r.extractors.describe().collect::<Vec<_>>()),
                    ("train", r.trainers.describe().collect()),
                    ("tagger", r.span_taggers.describe().collect()),
                ] {
                    for (name, description) in entries {
                        writeln!(w, "{kind}\t{name}\t{description}")?;
                    }
                }
                Ok(())
            })?;
        }
    }
    Ok(())
}

pub fn prepositions(ontology: Option<&Path>) -> Result<HashSet<String>> {
    Ok(match ontology {
        Some(p) => Ontology::load(p)?.prepositions().clone(),
        None => ontoshop_core::ontology::DEFAULT_PREPOSITIONS
            .iter()
            .map(|s| s.to_string())
            .collect(),
    })
}

pub fn extract(args: &ExtractArgs) -> Result<CandidateList> {
    let registries = ontoshop_neural::registries();
    let extractor = registries.extractors.create(&args.method, &args.model.settings())?;
    let mut graph = load_graph(&args.graph)?;
    if let Some(c) = &args.category {
        graph = graph.restrict_to_category(c);
    }
    let prepositions = prepositions(args.ontology.as_deref())?;
    extractor
        .extract(&ExtractionInput {
            graph: &graph,
            prepositions: &prepositions,
        })
        .with_context(|| format!("extracting with `{}`", args.method))
}
