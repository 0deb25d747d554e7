//! Fixtures shared by the acceptance suite and the CLI tests.

#![allow(dead_code)]

use std::collections::HashSet;
use std::time::{Duration, Instant};

use ontoshop_core::clickgraph::{ClickGraph, CleanConfig};
use ontoshop_core::eval::precision_at_n;
use ontoshop_core::features::FeatureContext;
use ontoshop_core::nerc::NumericValue;
use ontoshop_core::ontology::{Concept, ConceptId, Ontology, OntologyDocument};
use ontoshop_core::retrieval::SkuRecord;
use ontoshop_core::synth::{generate, Generator, GeneratorConfig};
use ontoshop_core::token_graph::extract_all;
use ontoshop_neural::cnn::{build_examples, CnnConfig, CnnTagger};
use ontoshop_neural::lstm_crf::{LstmCrfConfig, LstmCrfTagger};

pub fn id(s: &str) -> ConceptId {
    ConceptId::new(s).unwrap()
}

/// Shirts, TVs, stools and tissues with the attributes, sizes and brands
/// the ranking orderings depend on.
pub fn retrieval_ontology() -> Ontology {
    let doc = OntologyDocument::default()
        .with_concept(Concept::product(id("shirt"), "shirt"))
        .with_concept(Concept::product(id("tv"), "tv").with_synonyms(["television"]))
        .with_concept(Concept::product(id("stool"), "stool"))
        .with_concept(
            Concept::product(id("barstool"), "barstool")
                .with_synonyms(["bar stool"])
                .with_parent(id("stool")),
        )
        .with_concept(Concept::product(id("tissues"), "tissues").with_synonyms(["tissue"]))
        .with_concept(Concept::attribute(id("cotton"), "cotton", "Material"))
        .with_concept(Concept::attribute(id("polyester"), "polyester", "Material"))
        .with_concept(Concept::brand(id("kleenex"), "kleenex"))
        .with_concept(Concept::brand(id("puffs"), "puffs"))
        .with_concept(Concept::brand(id("scott"), "scott"))
        .with_default_product(id("kleenex"), id("tissues"));
    Ontology::try_new(doc).unwrap()
}

pub fn retrieval_catalog() -> Vec<SkuRecord> {
    let inch = |x: f64| NumericValue::new(x, "inch", 2.54);
    vec![
        SkuRecord::new("shirt-cotton", "crew neck shirt", id("shirt")).with_primary(id("cotton")),
        SkuRecord::new("shirt-poly", "cotton blend shirt", id("shirt"))
            .with_primary(id("polyester"))
            .with_attribute(id("cotton")),
        SkuRecord::new("tv-43", "43 inch led tv", id("tv")).with_numeric("screen", inch(43.0)),
        SkuRecord::new("tv-49", "49 inch led tv", id("tv")).with_numeric("screen", inch(49.0)),
        SkuRecord::new("stool-step", "wooden step stool", id("stool")),
        SkuRecord::new("barstool-swivel", "swivel bar stool", id("barstool")),
        SkuRecord::new("barstool-counter", "counter height barstool", id("barstool")),
        SkuRecord::new("tissues-kleenex", "kleenex facial tissues", id("tissues")).with_brand(id("kleenex")),
        SkuRecord::new("tissues-puffs", "puffs facial tissues", id("tissues")).with_brand(id("puffs")),
        SkuRecord::new("tissues-scott", "scott facial tissues", id("tissues")).with_brand(id("scott")),
    ]
}

#[derive(Debug, Clone)]
pub struct SyntheticMetrics {
    pub token_graph_p50: Option<f64>,
    /// Candidates compared on the held-out category and the precision of
    /// each method at that depth.
    pub held_out_n: usize,
    pub cnn_held_out: f64,
    pub token_graph_held_out: f64,
    pub compounds_recovered: usize,
    pub compounds_total: usize,
    pub elapsed: Duration,
}

/// Generate, clean, extract with the token graph, train both taggers on
/// the training categories, and score them.
pub fn synthetic_metrics(seed: u64) -> SyntheticMetrics {
    let start = Instant::now();
    let config = GeneratorConfig {
        seed,
        ..GeneratorConfig::default()
    };
    let data = generate(&config).unwrap();
    let clean_config = CleanConfig {
        brand_lexicon: data.brand_lexicon(),
        ..CleanConfig::default()
    };
    let graph = ClickGraph::ingest(data.clicks.iter().cloned().map(Ok))
        .unwrap()
        .clean(&clean_config);
    let prepositions: HashSet<String> = clean_config.prepositions.iter().cloned().collect();

    let all = extract_all(&graph, &prepositions);
    let token_graph_p50 = precision_at_n(&all, &data.ground_truth, 50).unwrap().at(50);

    let held_out = config.test_categories().to_vec();
    let test_graph = graph.restrict_to_category(&held_out[0]);
    let token_graph = extract_all(&test_graph, &prepositions);
    let train: Vec<_> = data
        .labeled
        .iter()
        .filter(|q| !held_out.contains(&q.category))
        .cloned()
        .collect();
    let examples = build_examples(&train, &data.pos, &FeatureContext::from_graph(&graph), 16).unwrap();
    let (cnn, _) = CnnTagger::train(&examples, CnnConfig::default()).unwrap();
    let queries: Vec<Vec<String>> = test_graph.queries().iter().map(|q| q.tokens.clone()).collect();
    let cnn_list = cnn
        .extract_candidates(&queries, &data.pos, &FeatureContext::from_graph(&test_graph))
        .unwrap();
    let n = 100.min(cnn_list.len()).min(token_graph.len());
    let at = |list| precision_at_n(list, &data.ground_truth, n).unwrap().at(n).unwrap_or(0.0);
    let (cnn_held_out, token_graph_held_out) = (at(&cnn_list), at(&token_graph));

    let sequences: Vec<_> = data
        .iob
        .iter()
        .filter(|(c, _)| !held_out.contains(c))
        .flat_map(|(_, s)| s.iter().cloned())
        .collect();
    let mut lstm = LstmCrfTagger::new(&data.embeddings, LstmCrfConfig::default()).unwrap();
    lstm.train(&sequences).unwrap();
    // A planted compound counts once it is decoded as an exact span in
    // any fresh query from the training categories that contains it.
    let fresh = Generator::new(config.clone()).unwrap().sample_queries(2000, 99);
    let mut seen = HashSet::new();
    let mut recovered = HashSet::new();
    for q in fresh.iter().filter(|q| !held_out.contains(&q.category)) {
        if !data.compounds.contains(&q.product) {
            continue;
        }
        seen.insert(q.product.clone());
        if !recovered.contains(&q.product) {
            let (decoded, _) = lstm.decode(&q.tokens).unwrap();
            if decoded.product_ranges().contains(&q.product_span) {
                recovered.insert(q.product.clone());
            }
        }
    }

    SyntheticMetrics {
        token_graph_p50,
        held_out_n: n,
        cnn_held_out,
        token_graph_held_out,
        compounds_recovered: recovered.len(),
        compounds_total: seen.len(),
        elapsed: start.elapsed(),
    }
}
