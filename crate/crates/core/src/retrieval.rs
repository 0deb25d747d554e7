//! Filter-then-boost retrieval over a SKU catalog.
//!
//! Recall is every SKU whose product class lies under a query product in
//! the is-a forest. Recalled SKUs are then ranked by attribute overlap,
//! primary attribute, brand, and numeric proximity.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nerc::{annotate, apply_default_product, NumericValue, ProductSpanTagger, QueryAnnotation};
use crate::ontology::{ConceptId, ConceptKind, Ontology, OntologyDocument};
use crate::text::normalize_tokens;

/// Attribute subclasses allowed as a primary attribute.
pub const PRIMARY_SUBCLASSES: &[&str] = &["Color", "Material"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkuRecord {
    pub sku_id: String,
    pub title: String,
    pub product_class: ConceptId,
    #[serde(default)]
    pub brand: Option<ConceptId>,
    #[serde(default)]
    pub attributes: BTreeSet<ConceptId>,
    #[serde(default)]
    pub primary_attribute: Option<ConceptId>,
    #[serde(default)]
    pub numeric_attributes: BTreeMap<String, NumericValue>,
    #[serde(default)]
    pub category: String,
}

impl SkuRecord {
    pub fn new(sku_id: &str, title: &str, product_class: ConceptId) -> Self {
        SkuRecord {
            sku_id: sku_id.to_owned(),
            title: title.to_owned(),
            product_class,
            brand: None,
            attributes: BTreeSet::new(),
            primary_attribute: None,
            numeric_attributes: BTreeMap::new(),
            category: String::new(),
        }
    }

    pub fn with_brand(mut self, brand: ConceptId) -> Self {
        self.brand = Some(brand);
        self
    }

    pub fn with_attribute(mut self, attribute: ConceptId) -> Self {
        self.attributes.insert(attribute);
        self
    }

    /// Sets the primary attribute and adds it to the attribute set.
    pub fn with_primary(mut self, attribute: ConceptId) -> Self {
        self.attributes.insert(attribute.clone());
        self.primary_attribute = Some(attribute);
        self
    }

    pub fn with_numeric(mut self, label: &str, value: NumericValue) -> Self {
        self.numeric_attributes.insert(label.to_owned(), value);
        self
    }
}

/// One SKU per line.
pub fn read_catalog<R: BufRead>(reader: R, origin: &str) -> Result<Vec<SkuRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| {
            Error::format(format!("{origin}:{}:{}", i + 1, e.column()), e.to_string())
        })?;
        out.push(record);
    }
    Ok(out)
}

pub fn write_catalog<W: Write>(records: &[SkuRecord], mut w: W) -> Result<()> {
    for r in records {
        let line = serde_json::to_string(r).expect("sku records always serialize");
        writeln!(w, "{line}").map_err(|e| Error::io("catalog", e))?;
    }
    Ok(())
}

pub fn load_catalog(path: impl AsRef<Path>) -> Result<Vec<SkuRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_catalog(std::io::BufReader::new(file), &path.display().to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoreWeights {
    pub w_attr: f64,
    pub w_primary: f64,
    pub w_brand: f64,
    pub w_numeric: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        ScoreWeights {
            w_attr: 1.0,
            w_primary: 2.0,
            w_brand: 1.5,
            w_numeric: 1.0,
        }
    }
}

impl ScoreWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.w_attr, self.w_primary, self.w_brand, self.w_numeric];
        if all.iter().all(|w| w.is_finite() && *w >= 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "score weights must be finite and non-negative: {self:?}"
            )))
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        ScoreWeights {
            w_attr: self.w_attr * factor,
            w_primary: self.w_primary * factor,
            w_brand: self.w_brand * factor,
            w_numeric: self.w_numeric * factor,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ScoreBreakdown {
    pub matched_attrs: Vec<ConceptId>,
    pub primary: bool,
    pub brand: bool,
    /// `|Δ|` in canonical units for every paired numeric value.
    pub numeric_deltas: Vec<f64>,
    /// Query tokens found in the title (fallback ranking only).
    pub title_overlap: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedResult {
    pub sku_id: String,
    pub score: f64,
    pub matched: ScoreBreakdown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResults {
    pub results: Vec<RankedResult>,
    /// No product was recognized; ranked by title overlap.
    pub fallback: bool,
}

/// `1 / (1 + |Δ|)`.
pub fn numeric_boost(delta: f64) -> f64 {
    1.0 / (1.0 + delta.abs())
}

fn pair_numeric(query: &NumericValue, sku: &SkuRecord) -> Option<f64> {
    if let Some(v) = query
        .attribute_hint
        .as_ref()
        .and_then(|h| sku.numeric_attributes.get(h))
    {
        return Some((query.canonical_magnitude - v.canonical_magnitude).abs());
    }
    sku.numeric_attributes
        .values()
        .map(|v| (query.canonical_magnitude - v.canonical_magnitude).abs())
        .min_by(f64::total_cmp)
}

/// Boost score of a recalled SKU.
pub fn score_sku(
    sku: &SkuRecord,
    annotation: &QueryAnnotation,
    weights: &ScoreWeights,
) -> (f64, ScoreBreakdown) {
    let query_attrs: BTreeSet<&ConceptId> = annotation.attribute_ids.iter().collect();
    let matched_attrs: Vec<ConceptId> = sku
        .attributes
        .iter()
        .filter(|a| query_attrs.contains(a))
        .cloned()
        .collect();
    let primary = sku
        .primary_attribute
        .as_ref()
        .is_some_and(|p| query_attrs.contains(p));
    let brand = sku
        .brand
        .as_ref()
        .is_some_and(|b| annotation.brand_ids.contains(b));
    let numeric_deltas: Vec<f64> = annotation
        .numeric_values
        .iter()
        .filter_map(|q| pair_numeric(q, sku))
        .collect();

    let mut score = weights.w_attr * matched_attrs.len() as f64;
    if primary {
        score += weights.w_primary;
    }
    if brand {
        score += weights.w_brand;
    }
    score += numeric_deltas
        .iter()
        .map(|d| weights.w_numeric * numeric_boost(*d))
        .sum::<f64>();
    let breakdown = ScoreBreakdown {
        matched_attrs,
        primary,
        brand,
        numeric_deltas,
        title_overlap: 0,
    };
    (score, breakdown)
}

#[derive(Serialize, Deserialize)]
struct IndexDoc {
    ontology: OntologyDocument,
    skus: Vec<SkuRecord>,
}

/// SKUs bucketed by product class, bundled with the ontology they were
/// validated against.
#[derive(Debug, Clone, PartialEq)]
pub struct SkuIndex {
    ontology: Ontology,
    skus: Vec<SkuRecord>,
    by_product: BTreeMap<ConceptId, Vec<usize>>,
    title_tokens: Vec<HashSet<String>>,
}

fn check_kind(
    ontology: &Ontology,
    sku: &str,
    id: &ConceptId,
    kind: ConceptKind,
    role: &str,
) -> Result<()> {
    match ontology.concept(id) {
        None => Err(Error::UnknownConcept(format!("{id} ({role} of sku {sku})"))),
        Some(c) if c.kind != kind => Err(Error::InvalidArgument(format!(
            "sku {sku}: {role} `{id}` is a {}, expected {kind}",
            c.kind
        ))),
        Some(_) => Ok(()),
    }
}

fn check_record(ontology: &Ontology, r: &SkuRecord) -> Result<()> {
    check_kind(ontology, &r.sku_id, &r.product_class, ConceptKind::Product, "product_class")?;
    if let Some(b) = &r.brand {
        check_kind(ontology, &r.sku_id, b, ConceptKind::Brand, "brand")?;
    }
    for a in &r.attributes {
        check_kind(ontology, &r.sku_id, a, ConceptKind::Attribute, "attribute")?;
    }
    if let Some(p) = &r.primary_attribute {
        check_kind(ontology, &r.sku_id, p, ConceptKind::Attribute, "primary_attribute")?;
        if !r.attributes.contains(p) {
            return Err(Error::InvalidArgument(format!(
                "sku {}: primary attribute `{p}` is not among its attributes",
                r.sku_id
            )));
        }
        let subclass = ontology.concept(p).and_then(|c| c.attribute_subclass.as_deref());
        if !subclass.is_some_and(|s| PRIMARY_SUBCLASSES.contains(&s)) {
            return Err(Error::InvalidArgument(format!(
                "sku {}: primary attribute `{p}` must be a Color or Material",
                r.sku_id
            )));
        }
    }
    Ok(())
}

impl SkuIndex {
    /// Validates every record against `ontology`. SKUs are stored sorted by
    /// id.
    pub fn build(records: Vec<SkuRecord>, ontology: Ontology) -> Result<Self> {
        let mut skus = records;
        skus.sort_by(|a, b| a.sku_id.cmp(&b.sku_id));
        if let Some(w) = skus.windows(2).find(|w| w[0].sku_id == w[1].sku_id) {
            return Err(Error::InvalidArgument(format!(
                "duplicate sku_id `{}`",
                w[0].sku_id
            )));
        }
        for r in &skus {
            check_record(&ontology, r)?;
        }
        let mut by_product: BTreeMap<ConceptId, Vec<usize>> = BTreeMap::new();
        for (i, r) in skus.iter().enumerate() {
            by_product.entry(r.product_class.clone()).or_default().push(i);
        }
        let title_tokens = skus
            .iter()
            .map(|r| normalize_tokens(&r.title).into_iter().collect())
            .collect();
        Ok(SkuIndex {
            ontology,
            skus,
            by_product,
            title_tokens,
        })
    }

    pub fn ontology(&self) -> &Ontology {
        &self.ontology
    }

    pub fn skus(&self) -> &[SkuRecord] {
        &self.skus
    }

    pub fn len(&self) -> usize {
        self.skus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.skus.is_empty()
    }

    /// SKUs indexed directly under `product` (no expansion).
    pub fn bucket(&self, product: &ConceptId) -> Vec<&SkuRecord> {
        self.by_product
            .get(product)
            .into_iter()
            .flatten()
            .map(|&i| &self.skus[i])
            .collect()
    }

    fn recall(&self, products: &[ConceptId]) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for p in products {
            let Ok(closure) = self.ontology.descendants_or_self(p) else {
                continue;
            };
            for c in closure {
                out.extend(self.by_product.get(&c).into_iter().flatten());
            }
        }
        out
    }

    /// Top-`k` SKUs for an annotated query, by score descending then
    /// sku_id ascending.
    pub fn search(
        &self,
        annotation: &QueryAnnotation,
        weights: &ScoreWeights,
        k: usize,
    ) -> SearchResults {
        let fallback = annotation.product_ids.is_empty();
        let mut results: Vec<RankedResult> = if fallback {
            let query: HashSet<&String> = annotation.tokens.iter().collect();
            self.skus
                .iter()
                .zip(&self.title_tokens)
                .filter_map(|(sku, title)| {
                    let overlap = query.iter().filter(|t| title.contains(**t)).count();
                    (overlap > 0).then(|| RankedResult {
                        sku_id: sku.sku_id.clone(),
                        score: overlap as f64,
                        matched: ScoreBreakdown {
                            title_overlap: overlap,
                            ..ScoreBreakdown::default()
                        },
                    })
                })
                .collect()
        } else {
            self.recall(&annotation.product_ids)
                .into_iter()
                .map(|i| {
                    let sku = &self.skus[i];
                    let (score, matched) = score_sku(sku, annotation, weights);
                    RankedResult {
                        sku_id: sku.sku_id.clone(),
                        score,
                        matched,
                    }
                })
                .collect()
        };
        results.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.sku_id.cmp(&b.sku_id)));
        results.truncate(k);
        SearchResults { results, fallback }
    }

    /// Annotates `query`, expands brand default products, and searches.
    pub fn search_query(
        &self,
        query: &str,
        tagger: Option<&dyn ProductSpanTagger>,
        weights: &ScoreWeights,
        k: usize,
    ) -> SearchResults {
        let annotation = apply_default_product(&annotate(query, &self.ontology, tagger), &self.ontology);
        self.search(&annotation, weights, k)
    }

    pub fn to_json_string(&self) -> String {
        let doc = IndexDoc {
            ontology: self.ontology.document().clone(),
            skus: self.skus.clone(),
        };
        let mut s = serde_json::to_string(&doc).expect("indexes always serialize");
        s.push('\n');
        s
    }

    pub fn from_json_str(json: &str, origin: &str) -> Result<Self> {
        let doc: IndexDoc = serde_json::from_str(json).map_err(|e| {
            Error::format(format!("{origin}:{}:{}", e.line(), e.column()), e.to_string())
        })?;
        SkuIndex::build(doc.skus, Ontology::try_new(doc.ontology)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let json = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        SkuIndex::from_json_str(&json, &path.display().to_string())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json_string()).map_err(|e| Error::io(path, e))
    }
}

/// Convenience wrapper over [`SkuIndex::build`].
pub fn index_skus(records: Vec<SkuRecord>, ontology: Ontology) -> Result<SkuIndex> {
    SkuIndex::build(records, ontology)
}

/// CSV `rank,sku_id,score,matched_attrs,primary,brand`; matched attribute
/// ids are joined with `;`.
pub fn write_results_csv<W: Write>(results: &[RankedResult], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["rank", "sku_id", "score", "matched_attrs", "primary", "brand"])
        .map_err(crate::candidates::csv_error("results"))?;
    for (i, r) in results.iter().enumerate() {
        let attrs: Vec<&str> = r.matched.matched_attrs.iter().map(ConceptId::as_str).collect();
        w.write_record([
            (i + 1).to_string(),
            r.sku_id.clone(),
            r.score.to_string(),
            attrs.join(";"),
            r.matched.primary.to_string(),
            r.matched.brand.to_string(),
        ])
        .map_err(crate::candidates::csv_error("results"))?;
    }
    w.flush().map_err(|e| Error::io("results", e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::Concept;

    fn id(s: &str) -> ConceptId {
        ConceptId::new(s).unwrap()
    }

    fn ontology() -> Ontology {
        let doc = OntologyDocument::default()
            .with_concept(Concept::product(id("chair"), "chair"))
            .with_concept(Concept::product(id("sofa"), "sofa"))
            .with_concept(Concept::product(id("shirt"), "shirt"))
            .with_concept(Concept::attribute(id("white"), "white", "Color"))
            .with_concept(Concept::attribute(id("brown"), "brown", "Color"))
            .with_concept(Concept::attribute(id("ottoman"), "ottoman", "Feature"))
            .with_concept(Concept::attribute(id("cotton"), "cotton", "Material"))
            .with_concept(Concept::attribute(id("polyester"), "polyester", "Material"))
            .with_concept(Concept::brand(id("acme"), "acme"));
        Ontology::try_new(doc).unwrap()
    }

    #[test]
    fn buckets() {
        let idx = index_skus(
            vec![
                SkuRecord::new("c1", "chair", id("chair")),
                SkuRecord::new("c2", "chair", id("chair")),
                SkuRecord::new("s1", "sofa", id("sofa")),
            ],
            ontology(),
        )
        .unwrap();
        assert_eq!(idx.bucket(&id("chair")).len(), 2);
        assert_eq!(idx.bucket(&id("sofa")).len(), 1);
    }

    #[test]
    fn invalid_records() {
        let dup = vec![
            SkuRecord::new("c1", "chair", id("chair")),
            SkuRecord::new("c1", "chair", id("chair")),
        ];
        assert!(index_skus(dup, ontology()).is_err());
        let unknown = vec![SkuRecord::new("x", "x", id("lamp"))];
        assert!(matches!(index_skus(unknown, ontology()), Err(Error::UnknownConcept(_))));
        let not_product = vec![SkuRecord::new("x", "x", id("white"))];
        assert!(index_skus(not_product, ontology()).is_err());
        let bad_primary = vec![SkuRecord::new("x", "x", id("chair")).with_primary(id("ottoman"))];
        assert!(index_skus(bad_primary, ontology()).is_err());
        let mut detached = SkuRecord::new("x", "x", id("chair"));
        detached.primary_attribute = Some(id("white"));
        assert!(index_skus(vec![detached], ontology()).is_err());
    }

    #[test]
    fn white_chair_with_ottoman() {
        let o = ontology();
        let idx = index_skus(
            vec![
                SkuRecord::new("brown-chair", "brown chair", id("chair")).with_primary(id("brown")),
                SkuRecord::new("white-chair", "white chair with ottoman", id("chair"))
                    .with_primary(id("white"))
                    .with_attribute(id("ottoman")),
                SkuRecord::new("white-sofa", "white sofa with ottoman", id("sofa"))
                    .with_primary(id("white"))
                    .with_attribute(id("ottoman")),
            ],
            o.clone(),
        )
        .unwrap();
        let a = annotate("white chair with ottoman", &o, None);
        let r = idx.search(&a, &ScoreWeights::default(), 10);
        let ids: Vec<&str> = r.results.iter().map(|r| r.sku_id.as_str()).collect();
        assert_eq!(ids, vec!["white-chair", "brown-chair"]);
        assert!(!r.fallback);
    }

    #[test]
    fn cotton_shirt_scores() {
        let o = ontology();
        let a = annotate("cotton shirt", &o, None);
        let pure = SkuRecord::new("a", "shirt", id("shirt")).with_primary(id("cotton"));
        let blend = SkuRecord::new("b", "shirt", id("shirt"))
            .with_primary(id("polyester"))
            .with_attribute(id("cotton"));
        let w = ScoreWeights::default();
        assert_eq!(score_sku(&pure, &a, &w).0, 3.0);
        assert_eq!(score_sku(&blend, &a, &w).0, 1.0);
        let none = SkuRecord::new("c", "shirt", id("shirt"));
        assert_eq!(score_sku(&none, &a, &w).0, 0.0);
    }

    #[test]
    fn numeric_boosts() {
        let q = NumericValue::new(45.0, "inch", 2.54);
        let tv43 = SkuRecord::new("a", "tv", id("chair")).with_numeric("size", NumericValue::new(43.0, "inch", 2.54));
        let tv49 = SkuRecord::new("b", "tv", id("chair")).with_numeric("size", NumericValue::new(49.0, "inch", 2.54));
        let mut a = annotate("chair", &ontology(), None);
        a.numeric_values.push(q);
        let w = ScoreWeights::default();
        let s43 = score_sku(&tv43, &a, &w).0;
        let s49 = score_sku(&tv49, &a, &w).0;
        assert!((s43 - 1.0 / (1.0 + 2.0 * 2.54)).abs() < 1e-12);
        assert!((s49 - 1.0 / (1.0 + 4.0 * 2.54)).abs() < 1e-12);
        assert_eq!(numeric_boost(0.0), 1.0);
    }

    #[test]
    fn hint_selects_attribute() {
        let q = NumericValue::new(10.0, "cm", 1.0).with_hint("depth");
        let sku = SkuRecord::new("a", "x", id("chair"))
            .with_numeric("width", NumericValue::new(10.0, "cm", 1.0))
            .with_numeric("depth", NumericValue::new(20.0, "cm", 1.0));
        let mut a = annotate("chair", &ontology(), None);
        a.numeric_values.push(q);
        assert_eq!(score_sku(&sku, &a, &ScoreWeights::default()).1.numeric_deltas, vec![10.0]);
    }

    #[test]
    fn fallback_uses_titles() {
        let o = ontology();
        let idx = index_skus(
            vec![
                SkuRecord::new("a", "fancy gizmo", id("chair")),
                SkuRecord::new("b", "plain thing", id("chair")),
            ],
            o.clone(),
        )
        .unwrap();
        let r = idx.search(&annotate("gizmo", &o, None), &ScoreWeights::default(), 10);
        assert!(r.fallback);
        assert_eq!(r.results.len(), 1);
        assert_eq!(r.results[0].sku_id, "a");
    }

    #[test]
    fn index_round_trip_and_csv() {
        let o = ontology();
        let idx = index_skus(
            vec![SkuRecord::new("c1", "white chair", id("chair")).with_primary(id("white"))],
            o,
        )
        .unwrap();
        let back = SkuIndex::from_json_str(&idx.to_json_string(), "idx").unwrap();
        assert_eq!(back, idx);
        let r = idx.search_query("white chair", None, &ScoreWeights::default(), 5);
        let mut buf = Vec::new();
        write_results_csv(&r.results, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "rank,sku_id,score,matched_attrs,primary,brand\n1,c1,3,white,true,false\n"
        );
    }

    #[test]
    fn catalog_jsonl() {
        let recs = vec![
            SkuRecord::new("a", "x", id("chair")).with_brand(id("acme")),
            SkuRecord::new("b", "y", id("sofa")),
        ];
        let mut buf = Vec::new();
        write_catalog(&recs, &mut buf).unwrap();
        assert_eq!(read_catalog(buf.as_slice(), "c").unwrap(), recs);
        let minimal = r#"{"sku_id":"a","title":"t","product_class":"chair"}"#;
        assert_eq!(read_catalog(minimal.as_bytes(), "c").unwrap().len(), 1);
        assert!(read_catalog("{\"sku_id\":1}\n".as_bytes(), "c").is_err());
    }
}
