//! Seeded synthetic click logs with known products.
//!
//! Queries follow `[context?] [brand?] [attribute]* product [prep tail]?`.
//! Every (product, category) pair owns a few SKU clusters; a query string
//! always clicks into the same cluster, so components in the click graph
//! line up with planted products. A noise fraction adds broad queries
//! (clicks spread across many categories) and brand-only queries, which
//! graph cleaning is expected to drop.
//!
//! Output is a pure function of the config: the same seed produces the
//! same bytes.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::clickgraph::{ClickRecord, CLICK_LOG_HEADER};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::eval::{AnnotationSet, Label};
use crate::iob::{write_iob, IobSequence};
use crate::labeled::{write_labeled, LabeledQuery};
use crate::ontology::{Concept, ConceptId, Ontology, OntologyDocument};
use crate::pos::{PosTable, PosTag};
use crate::text::stem_token;

const ATTRIBUTE_SUBCLASSES: &[&str] = &["Color", "Material", "Gender", "Style"];
const TAIL_PREPOSITIONS: &[&str] = &["for", "with"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub seed: u64,
    /// Single-token products.
    pub products: usize,
    /// Two-token products `modifier head`, where `head` is also a product.
    pub compound_products: usize,
    pub attributes: usize,
    pub brands: usize,
    /// Filler nouns used in broad queries and preposition tails.
    pub context_words: usize,
    pub categories: Vec<String>,
    /// The last `test_categories` categories are held out.
    pub test_categories: usize,
    /// Number of query events.
    pub queries: usize,
    pub product_final_prob: f64,
    pub preposition_tail_prob: f64,
    pub noise_rate: f64,
    pub brand_prob: f64,
    pub context_prob: f64,
    pub max_attributes: usize,
    /// Chance a product is sold in a second category.
    pub second_category_prob: f64,
    /// Attributes compatible with each product.
    pub attributes_per_product: usize,
    pub clusters_per_pair: usize,
    pub skus_per_cluster: usize,
    /// Chance of an extra weight-1 click on a random SKU.
    pub accidental_click_prob: f64,
    pub embedding_dim: usize,
    pub embedding_noise: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            seed: 7,
            products: 50,
            compound_products: 10,
            attributes: 40,
            brands: 20,
            context_words: 15,
            categories: ["electronics", "womens", "mens", "kids", "furniture", "home", "baby"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            test_categories: 1,
            queries: 5000,
            product_final_prob: 0.9,
            preposition_tail_prob: 0.2,
            noise_rate: 0.1,
            brand_prob: 0.3,
            context_prob: 0.15,
            max_attributes: 2,
            second_category_prob: 0.3,
            attributes_per_product: 8,
            clusters_per_pair: 3,
            skus_per_cluster: 3,
            accidental_click_prob: 0.2,
            embedding_dim: 32,
            embedding_noise: 0.5,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(format!("generator config: {msg}")));
        let probs = [
            ("product_final_prob", self.product_final_prob),
            ("preposition_tail_prob", self.preposition_tail_prob),
            ("noise_rate", self.noise_rate),
            ("brand_prob", self.brand_prob),
            ("context_prob", self.context_prob),
            ("second_category_prob", self.second_category_prob),
            ("accidental_click_prob", self.accidental_click_prob),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return bad(&format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        if self.products == 0 {
            return bad("products must be positive");
        }
        if self.compound_products > self.products {
            return bad("compound_products cannot exceed products");
        }
        if self.attributes == 0 || self.brands == 0 || self.context_words == 0 {
            return bad("attributes, brands and context_words must be positive");
        }
        let unique: BTreeSet<&String> = self.categories.iter().collect();
        if unique.len() != self.categories.len() || self.categories.iter().any(|c| c.is_empty()) {
            return bad("categories must be distinct and non-empty");
        }
        if self.test_categories >= self.categories.len() {
            return bad("at least one category must remain for training");
        }
        if self.clusters_per_pair == 0 || self.skus_per_cluster == 0 || self.embedding_dim == 0 {
            return bad("clusters_per_pair, skus_per_cluster and embedding_dim must be positive");
        }
        if !(self.embedding_noise >= 0.0 && self.embedding_noise.is_finite()) {
            return bad("embedding_noise must be finite and non-negative");
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let json = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: GeneratorConfig = serde_json::from_str(&json).map_err(|e| {
            Error::format(format!("{}:{}:{}", path.display(), e.line(), e.column()), e.to_string())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn train_categories(&self) -> &[String] {
        &self.categories[..self.categories.len() - self.test_categories]
    }

    pub fn test_categories(&self) -> &[String] {
        &self.categories[self.categories.len() - self.test_categories..]
    }
}

#[derive(Debug, Clone)]
struct Product {
    tokens: Vec<String>,
    categories: Vec<usize>,
    attributes: Vec<usize>,
}

impl Product {
    fn phrase(&self) -> String {
        self.tokens.join(" ")
    }
}

#[derive(Debug, Clone)]
struct Sku {
    id: String,
    title: String,
    category: usize,
}

/// A generated query with its planted product span.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledQuery {
    pub category: String,
    pub tokens: Vec<String>,
    /// Half-open token range of the product phrase.
    pub product_span: (usize, usize),
    pub product: String,
}

impl SampledQuery {
    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }

    /// Product tokens as the convolutional tagger sees them: only the head
    /// (last) token of a multi-word product is marked.
    pub fn head_labels(&self) -> Vec<bool> {
        (0..self.tokens.len())
            .map(|i| i + 1 == self.product_span.1)
            .collect()
    }
}

/// The world a config describes: vocabulary, products, catalog.
#[derive(Debug, Clone)]
pub struct Generator {
    config: GeneratorConfig,
    products: Vec<Product>,
    attributes: Vec<(String, &'static str)>,
    brands: Vec<String>,
    context: Vec<String>,
    modifiers: Vec<String>,
    skus: Vec<Sku>,
    /// (product, category) → clusters of SKU indices.
    clusters: BTreeMap<(usize, usize), Vec<Vec<usize>>>,
    skus_by_category: Vec<Vec<usize>>,
    skus_by_brand: Vec<Vec<usize>>,
    pairs: Vec<(usize, usize)>,
}

/// Everything one generator run produces.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub config: GeneratorConfig,
    pub clicks: Vec<ClickRecord>,
    pub ground_truth: AnnotationSet,
    pub labeled: Vec<LabeledQuery>,
    pub iob: BTreeMap<String, Vec<IobSequence>>,
    pub ontology: Ontology,
    pub pos: PosTable,
    pub embeddings: EmbeddingTable,
    /// Planted single-token products.
    pub products: Vec<String>,
    /// Planted multi-word products.
    pub compounds: Vec<String>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    config: &'a GeneratorConfig,
    files: Vec<String>,
    click_rows: usize,
    labeled_queries: usize,
    products: &'a [String],
    compounds: &'a [String],
    train_categories: &'a [String],
    test_categories: &'a [String],
}

fn pseudo_words(rng: &mut ChaCha8Rng, n: usize, taken: &mut HashSet<String>) -> Vec<String> {
    const ONSETS: &[&str] = &[
        "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "gl", "pl",
        "tr",
    ];
    const VOWELS: &[&str] = &["a", "e", "i", "o", "u"];
    const CODAS: &[&str] = &["", "", "n", "r", "k", "m"];
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let syllables = rng.random_range(2..=3);
        let mut w = String::new();
        for _ in 0..syllables {
            w.push_str(ONSETS.choose(rng).expect("non-empty"));
            w.push_str(VOWELS.choose(rng).expect("non-empty"));
        }
        w.push_str(CODAS.choose(rng).expect("non-empty"));
        if stem_token(&w) == w && taken.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

fn sample_distinct(rng: &mut ChaCha8Rng, len: usize, amount: usize) -> Vec<usize> {
    rand::seq::index::sample(rng, len, amount.min(len)).into_vec()
}

/// A valid random ontology with about `size` concepts of each kind:
/// products with is-a links to earlier products, brands with default
/// products, attributes with subclasses and slots, synonyms, and an
/// extra unit with a random factor. Used to exercise serialization.
pub fn random_ontology(seed: u64, size: usize) -> Ontology {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut taken = HashSet::new();
    let n = size.max(1);
    let mut words = pseudo_words(&mut rng, 3 * n * 3, &mut taken).into_iter();
    let mut next = || words.next().expect("enough words");
    let mut doc = OntologyDocument::default();
    let id = |prefix: &str, i: usize| ConceptId::new(format!("{prefix}{i}")).expect("valid id");
    for i in 0..n {
        let mut c = Concept::product(id("p", i), &next());
        if i > 0 && rng.random::<bool>() {
            c = c.with_parent(id("p", rng.random_range(0..i)));
        }
        let synonyms: Vec<String> = (0..rng.random_range(0..=2)).map(|_| next()).collect();
        doc = doc.with_concept(c.with_synonyms(synonyms));
    }
    for i in 0..n {
        doc = doc.with_concept(Concept::brand(id("b", i), &next()));
        if rng.random::<bool>() {
            doc = doc.with_default_product(id("b", i), id("p", rng.random_range(0..n)));
        }
    }
    for i in 0..n {
        let subclass = ATTRIBUTE_SUBCLASSES.choose(&mut rng).expect("non-empty");
        doc = doc.with_concept(Concept::attribute(id("a", i), &next(), subclass));
        doc = doc.with_attribute_slot(id("p", rng.random_range(0..n)), id("a", i));
    }
    doc.units.insert("ft".to_owned(), rng.random_range(1.0..100.0));
    Ontology::new(doc)
}

impl Generator {
    pub fn new(config: GeneratorConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut taken: HashSet<String> = crate::ontology::DEFAULT_PREPOSITIONS
            .iter()
            .map(|s| s.to_string())
            .chain(["cm", "inch"].map(String::from))
            .collect();

        let singles = pseudo_words(&mut rng, config.products, &mut taken);
        let modifiers = pseudo_words(&mut rng, config.compound_products, &mut taken);
        let attribute_words = pseudo_words(&mut rng, config.attributes, &mut taken);
        let brands = pseudo_words(&mut rng, config.brands, &mut taken);
        let context = pseudo_words(&mut rng, config.context_words, &mut taken);

        let attributes: Vec<(String, &'static str)> = attribute_words
            .into_iter()
            .enumerate()
            .map(|(i, w)| (w, ATTRIBUTE_SUBCLASSES[i % ATTRIBUTE_SUBCLASSES.len()]))
            .collect();

        let mut token_lists: Vec<Vec<String>> = singles.iter().map(|w| vec![w.clone()]).collect();
        let heads = sample_distinct(&mut rng, singles.len(), modifiers.len());
        for (m, h) in modifiers.iter().zip(heads) {
            token_lists.push(vec![m.clone(), singles[h].clone()]);
        }

        let n_cat = config.categories.len();
        let mut order: Vec<usize> = (0..token_lists.len()).collect();
        order.shuffle(&mut rng);
        let mut home = vec![0; token_lists.len()];
        for (slot, &p) in order.iter().enumerate() {
            home[p] = slot % n_cat;
        }
        let products: Vec<Product> = token_lists
            .into_iter()
            .enumerate()
            .map(|(p, tokens)| {
                let mut categories = vec![home[p]];
                if n_cat > 1 && rng.random::<f64>() < config.second_category_prob {
                    let other = (home[p] + rng.random_range(1..n_cat)) % n_cat;
                    categories.push(other);
                }
                let mut attributes =
                    sample_distinct(&mut rng, config.attributes, config.attributes_per_product);
                attributes.sort_unstable();
                Product {
                    tokens,
                    categories,
                    attributes,
                }
            })
            .collect();

        let mut g = Generator {
            skus_by_category: vec![Vec::new(); n_cat],
            skus_by_brand: vec![Vec::new(); brands.len()],
            config,
            products,
            attributes,
            brands,
            context,
            modifiers,
            skus: Vec::new(),
            clusters: BTreeMap::new(),
            pairs: Vec::new(),
        };
        for p in 0..g.products.len() {
            for c in g.products[p].categories.clone() {
                g.pairs.push((p, c));
                let mut clusters = Vec::new();
                for _ in 0..g.config.clusters_per_pair {
                    let mut cluster = Vec::new();
                    for _ in 0..g.config.skus_per_cluster {
                        let brand = rng.random_range(0..g.brands.len());
                        let product = &g.products[p];
                        let attr = *product.attributes.choose(&mut rng).expect("attributes");
                        let idx = g.skus.len();
                        g.skus.push(Sku {
                            id: format!("sku{idx:05}"),
                            title: format!(
                                "{} {} {}",
                                g.brands[brand],
                                g.attributes[attr].0,
                                product.phrase()
                            ),
                            category: c,
                        });
                        g.skus_by_category[c].push(idx);
                        g.skus_by_brand[brand].push(idx);
                        cluster.push(idx);
                    }
                    clusters.push(cluster);
                }
                g.clusters.insert((p, c), clusters);
            }
        }
        Ok(g)
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.config
    }

    /// One well-formed (noise-free) query.
    fn genuine_query(&self, rng: &mut ChaCha8Rng) -> (SampledQuery, usize, usize) {
        let &(p, c) = self.pairs.choose(rng).expect("at least one product");
        let product = &self.products[p];
        let mut tokens: Vec<String> = Vec::new();
        if rng.random::<f64>() < self.config.context_prob {
            tokens.push(self.context.choose(rng).expect("context").clone());
        }
        if rng.random::<f64>() < self.config.brand_prob {
            tokens.push(self.brands.choose(rng).expect("brands").clone());
        }
        let n_attr = rng.random_range(0..=self.config.max_attributes);
        let mut attrs: Vec<String> = sample_distinct(rng, product.attributes.len(), n_attr)
            .into_iter()
            .map(|i| self.attributes[product.attributes[i]].0.clone())
            .collect();
        let trailing = if rng.random::<f64>() < self.config.product_final_prob {
            None
        } else {
            Some(attrs.pop().unwrap_or_else(|| {
                let a = *product.attributes.choose(rng).expect("attributes");
                self.attributes[a].0.clone()
            }))
        };
        tokens.extend(attrs);
        let start = tokens.len();
        tokens.extend(product.tokens.iter().cloned());
        let end = tokens.len();
        tokens.extend(trailing);
        if rng.random::<f64>() < self.config.preposition_tail_prob {
            tokens.push(TAIL_PREPOSITIONS.choose(rng).expect("prepositions").to_string());
            tokens.push(self.context.choose(rng).expect("context").clone());
        }
        let sample = SampledQuery {
            category: self.config.categories[c].clone(),
            tokens,
            product_span: (start, end),
            product: product.phrase(),
        };
        (sample, p, c)
    }

    /// Fresh noise-free queries from the same distribution as the log,
    /// drawn with their own seed.
    pub fn sample_queries(&self, n: usize, seed: u64) -> Vec<SampledQuery> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| self.genuine_query(&mut rng).0).collect()
    }

    fn click(&self, query: &str, sku: usize, weight: f64) -> ClickRecord {
        let s = &self.skus[sku];
        ClickRecord::new(query, &s.id, &s.title, &self.config.categories[s.category], weight)
    }

    fn ontology(&self) -> Ontology {
        let mut doc = OntologyDocument::default();
        for b in &self.brands {
            doc = doc.with_concept(Concept::brand(ConceptId::new(b.clone()).expect("pseudo-word"), b));
        }
        for (a, subclass) in &self.attributes {
            doc = doc.with_concept(Concept::attribute(
                ConceptId::new(a.clone()).expect("pseudo-word"),
                a,
                subclass,
            ));
        }
        Ontology::new(doc)
    }

    fn pos_table(&self, rng: &mut ChaCha8Rng) -> PosTable {
        use PosTag::*;
        let mut table = PosTable::new();
        let mut add = |table: &mut PosTable, word: &str, base: &[(PosTag, f64)]| {
            let jittered: Vec<(PosTag, f64)> = base
                .iter()
                .map(|&(t, p)| (t, p * rng.random_range(0.5..1.5)))
                .collect();
            table.insert_counts(word, &jittered).expect("positive counts");
        };
        for p in &self.products[..self.config.products] {
            add(&mut table, &p.tokens[0], &[(Noun, 0.85), (Verb, 0.05), (Adj, 0.05), (X, 0.05)]);
        }
        for m in &self.modifiers {
            add(&mut table, m, &[(Noun, 0.6), (Adj, 0.3), (X, 0.1)]);
        }
        for (a, subclass) in &self.attributes {
            let base: &[(PosTag, f64)] = match *subclass {
                "Material" => &[(Noun, 0.6), (Adj, 0.3), (X, 0.1)],
                "Color" => &[(Adj, 0.7), (Noun, 0.2), (X, 0.1)],
                _ => &[(Adj, 0.6), (Noun, 0.2), (Verb, 0.1), (X, 0.1)],
            };
            add(&mut table, a, base);
        }
        for b in &self.brands {
            add(&mut table, b, &[(Noun, 0.5), (X, 0.5)]);
        }
        for w in &self.context {
            add(&mut table, w, &[(Noun, 0.5), (Verb, 0.3), (Adj, 0.2)]);
        }
        for p in TAIL_PREPOSITIONS {
            add(&mut table, p, &[(Adp, 0.95), (Adv, 0.05)]);
        }
        table
    }

    fn embeddings(&self, rng: &mut ChaCha8Rng) -> EmbeddingTable {
        let dim = self.config.embedding_dim;
        let unit = Normal::new(0.0, 1.0).expect("valid normal");
        let noise = Normal::new(0.0, self.config.embedding_noise.max(f64::MIN_POSITIVE))
            .expect("valid normal");
        let mut table = EmbeddingTable::new(dim);
        let classes: Vec<Vec<&str>> = vec![
            self.products[..self.config.products]
                .iter()
                .map(|p| p.tokens[0].as_str())
                .collect(),
            self.modifiers.iter().map(String::as_str).collect(),
            self.attributes.iter().map(|(a, _)| a.as_str()).collect(),
            self.brands.iter().map(String::as_str).collect(),
            self.context.iter().map(String::as_str).collect(),
            TAIL_PREPOSITIONS.to_vec(),
        ];
        for words in classes {
            let centroid: Vec<f64> = (0..dim).map(|_| unit.sample(rng)).collect();
            for w in words {
                let v = centroid.iter().map(|c| c + noise.sample(rng)).collect();
                table.insert(w, v).expect("dimension matches");
            }
        }
        table
    }

    fn ground_truth(&self) -> AnnotationSet {
        let mut set = AnnotationSet::new();
        for p in &self.products {
            set.insert(p.phrase(), Label::P);
        }
        let negatives = self
            .modifiers
            .iter()
            .chain(self.attributes.iter().map(|(a, _)| a))
            .chain(&self.brands)
            .chain(&self.context)
            .cloned()
            .chain(TAIL_PREPOSITIONS.iter().map(|s| s.to_string()));
        for w in negatives {
            set.insert(w, Label::N);
        }
        set
    }

    pub fn generate(&self) -> SyntheticData {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed.wrapping_add(1));
        let mut clicks = Vec::new();
        let mut labeled = Vec::new();
        let mut iob: BTreeMap<String, Vec<IobSequence>> = self
            .config
            .categories
            .iter()
            .map(|c| (c.clone(), Vec::new()))
            .collect();
        let mut cluster_of: BTreeMap<(String, usize), usize> = BTreeMap::new();
        let n_cat = self.config.categories.len();

        for _ in 0..self.config.queries {
            if rng.random::<f64>() < self.config.noise_rate {
                if rng.random::<bool>() {
                    // broad: equal clicks across at least four categories
                    let words = rng.random_range(1..=2);
                    let query = sample_distinct(&mut rng, self.context.len(), words)
                        .into_iter()
                        .map(|i| self.context[i].as_str())
                        .collect::<Vec<_>>()
                        .join(" ");
                    let k = rng.random_range(n_cat.min(4)..=n_cat);
                    for c in sample_distinct(&mut rng, n_cat, k) {
                        if let Some(&s) = self.skus_by_category[c].choose(&mut rng) {
                            clicks.push(self.click(&query, s, 3.0));
                        }
                    }
                } else {
                    let b = rng.random_range(0..self.brands.len());
                    let n = rng.random_range(1..=2);
                    for i in sample_distinct(&mut rng, self.skus_by_brand[b].len(), n) {
                        let w = rng.random_range(2..=6) as f64;
                        clicks.push(self.click(&self.brands[b], self.skus_by_brand[b][i], w));
                    }
                }
                continue;
            }

            let (sample, p, c) = self.genuine_query(&mut rng);
            let text = sample.text();
            let clusters = &self.clusters[&(p, c)];
            let cluster = *cluster_of
                .entry((text.clone(), c))
                .or_insert_with(|| rng.random_range(0..clusters.len()));
            let members = &clusters[cluster];
            let n = rng.random_range(1..=2);
            for i in sample_distinct(&mut rng, members.len(), n) {
                let w = rng.random_range(2..=6) as f64;
                clicks.push(self.click(&text, members[i], w));
            }
            if rng.random::<f64>() < self.config.accidental_click_prob {
                let s = rng.random_range(0..self.skus.len());
                clicks.push(self.click(&text, s, 1.0));
            }

            labeled.push(
                LabeledQuery::new(&sample.category, sample.tokens.clone(), sample.head_labels())
                    .expect("one label per token"),
            );
            iob.get_mut(&sample.category)
                .expect("known category")
                .push(
                    IobSequence::from_spans(sample.tokens.clone(), &[sample.product_span])
                        .expect("span within query"),
                );
        }

        let pos = self.pos_table(&mut rng);
        let embeddings = self.embeddings(&mut rng);
        SyntheticData {
            config: self.config.clone(),
            clicks,
            ground_truth: self.ground_truth(),
            labeled,
            iob,
            ontology: self.ontology(),
            pos,
            embeddings,
            products: self.products[..self.config.products]
                .iter()
                .map(Product::phrase)
                .collect(),
            compounds: self.products[self.config.products..]
                .iter()
                .map(Product::phrase)
                .collect(),
        }
    }
}

/// Builds the world for `config` and generates its data.
pub fn generate(config: &GeneratorConfig) -> Result<SyntheticData> {
    Ok(Generator::new(config.clone())?.generate())
}

impl SyntheticData {
    /// Brand names, for the brand-only cleaning rule.
    pub fn brand_lexicon(&self) -> BTreeSet<String> {
        self.ontology
            .concepts()
            .filter(|c| c.kind == crate::ontology::ConceptKind::Brand)
            .map(|c| c.name.clone())
            .collect()
    }

    pub fn click_log_tsv(&self) -> String {
        let mut s = String::from(CLICK_LOG_HEADER);
        s.push('\n');
        for r in &self.clicks {
            s.push_str(&r.to_tsv_line());
            s.push('\n');
        }
        s
    }

    /// Writes `clicks.tsv`, `ground_truth.csv`, `labeled.tsv`,
    /// `iob/<category>.iob`, `ontology.json`, `pos.tsv`, `embeddings.txt`
    /// and `manifest.json` under `dir`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let iob_dir = dir.join("iob");
        std::fs::create_dir_all(&iob_dir).map_err(|e| Error::io(&iob_dir, e))?;
        let write = |name: &str, bytes: Vec<u8>| -> Result<()> {
            let path = dir.join(name);
            std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))
        };

        write("clicks.tsv", self.click_log_tsv().into_bytes())?;
        let mut buf = Vec::new();
        self.ground_truth.write_csv(&mut buf)?;
        write("ground_truth.csv", buf)?;
        let mut buf = Vec::new();
        write_labeled(&self.labeled, &mut buf)?;
        write("labeled.tsv", buf)?;
        let mut files = vec![
            "clicks.tsv".to_owned(),
            "ground_truth.csv".to_owned(),
            "labeled.tsv".to_owned(),
        ];
        for (category, seqs) in &self.iob {
            let mut buf = Vec::new();
            write_iob(seqs, &mut buf)?;
            let name = format!("iob/{category}.iob");
            write(&name, buf)?;
            files.push(name);
        }
        write("ontology.json", self.ontology.to_json_string().into_bytes())?;
        let mut buf = Vec::new();
        self.pos.write_tsv(&mut buf)?;
        write("pos.tsv", buf)?;
        let mut buf = Vec::new();
        self.embeddings.write_text(&mut buf)?;
        write("embeddings.txt", buf)?;
        files.extend(["ontology.json", "pos.tsv", "embeddings.txt"].map(String::from));

        let manifest = Manifest {
            config: &self.config,
            files,
            click_rows: self.clicks.len(),
            labeled_queries: self.labeled.len(),
            products: &self.products,
            compounds: &self.compounds,
            train_categories: self.config.train_categories(),
            test_categories: self.config.test_categories(),
        };
        let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        json.push('\n');
        write("manifest.json", json.into_bytes())
    }
}
