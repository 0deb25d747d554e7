//! Query annotation: ontology lexicon lookup (longest match first),
//! numeric values with units, an optional learned product tagger for
//! queries the lexicon cannot resolve, and brand → default product
//! expansion.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::ontology::{ConceptId, ConceptKind, Ontology};
use crate::text::{normalize_tokens, stem_token};

/// A number with its unit, also expressed in the canonical unit of its
/// dimension (cm for length).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericValue {
    pub magnitude: f64,
    pub unit: String,
    pub canonical_magnitude: f64,
    #[serde(default)]
    pub attribute_hint: Option<String>,
}

impl NumericValue {
    pub fn new(magnitude: f64, unit: &str, factor: f64) -> Self {
        NumericValue {
            magnitude,
            unit: unit.to_owned(),
            canonical_magnitude: magnitude * factor,
            attribute_hint: None,
        }
    }

    pub fn with_hint(mut self, hint: &str) -> Self {
        self.attribute_hint = Some(hint.to_owned());
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EntityLabel {
    /// `None` marks a tagger-proposed product absent from the ontology.
    Product(Option<ConceptId>),
    Brand(ConceptId),
    Attribute { id: ConceptId, subclass: String },
    NumericAttr,
    Other,
}

impl EntityLabel {
    pub fn name(&self) -> &'static str {
        match self {
            EntityLabel::Product(_) => "Product",
            EntityLabel::Brand(_) => "Brand",
            EntityLabel::Attribute { .. } => "Attribute",
            EntityLabel::NumericAttr => "NumericAttr",
            EntityLabel::Other => "Other",
        }
    }

    pub fn concept(&self) -> Option<&ConceptId> {
        match self {
            EntityLabel::Product(id) => id.as_ref(),
            EntityLabel::Brand(id) | EntityLabel::Attribute { id, .. } => Some(id),
            EntityLabel::NumericAttr | EntityLabel::Other => None,
        }
    }
}

/// Proposes product spans (half-open token ranges) for a normalized query.
pub trait ProductSpanTagger: Send + Sync {
    fn product_spans(&self, tokens: &[String]) -> Vec<(usize, usize)>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryAnnotation {
    pub query: String,
    pub tokens: Vec<String>,
    /// One label per token.
    pub labels: Vec<EntityLabel>,
    pub product_ids: Vec<ConceptId>,
    pub brand_ids: Vec<ConceptId>,
    pub attribute_ids: Vec<ConceptId>,
    pub numeric_values: Vec<NumericValue>,
    /// Tagger spans that matched no Product concept.
    pub unresolved_products: Vec<String>,
    /// Brand whose default product was injected, if any.
    pub default_product_from: Option<ConceptId>,
    /// No product was resolved.
    pub fallback: bool,
}

impl QueryAnnotation {
    pub fn to_json(&self) -> serde_json::Value {
        let tokens: Vec<_> = self
            .tokens
            .iter()
            .zip(&self.labels)
            .map(|(text, label)| {
                let mut t = json!({
                    "text": text,
                    "label": label.name(),
                    "concept": label.concept().map(|c| c.as_str()),
                });
                if let EntityLabel::Attribute { subclass, .. } = label {
                    t["subclass"] = json!(subclass);
                }
                t
            })
            .collect();
        json!({
            "query": self.query,
            "tokens": tokens,
            "numeric": self.numeric_values,
            "products": self.product_ids,
            "brands": self.brand_ids,
            "attributes": self.attribute_ids,
            "unresolved_products": self.unresolved_products,
            "default_product_from": self.default_product_from,
            "fallback": self.fallback,
        })
    }
}

fn parse_number(token: &str) -> Option<f64> {
    let well_formed = !token.is_empty()
        && token.chars().all(|c| c.is_ascii_digit() || c == '.')
        && token.chars().filter(|c| *c == '.').count() <= 1
        && token.starts_with(|c: char| c.is_ascii_digit());
    if well_formed {
        token.parse().ok()
    } else {
        None
    }
}

/// `(start, end, value)` for every `<number> <unit>` or `<number><unit>`
/// pattern with a known unit. `units` maps stemmed unit names to factors.
fn scan_numeric(tokens: &[String], units: &HashMap<String, f64>) -> Vec<(usize, usize, NumericValue)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let tok = &tokens[i];
        if let Some(magnitude) = parse_number(tok) {
            if let Some(unit) = tokens.get(i + 1) {
                if let Some(&factor) = units.get(unit) {
                    out.push((i, i + 2, NumericValue::new(magnitude, unit, factor)));
                    i += 2;
                    continue;
                }
            }
        } else if let Some(split) = tok.find(|c: char| !(c.is_ascii_digit() || c == '.')) {
            let (num, unit) = tok.split_at(split);
            if let Some(magnitude) = parse_number(num) {
                let unit = stem_token(unit);
                if let Some(&factor) = units.get(&unit) {
                    out.push((i, i + 1, NumericValue::new(magnitude, &unit, factor)));
                }
            }
        }
        i += 1;
    }
    out
}

/// Numeric values in a normalized token list. Unknown units are ignored.
pub fn parse_numeric(tokens: &[String], units: &HashMap<String, f64>) -> Vec<NumericValue> {
    scan_numeric(tokens, units)
        .into_iter()
        .map(|(_, _, v)| v)
        .collect()
}

/// Labels every token of `query` exactly once.
pub fn annotate(
    query: &str,
    ontology: &Ontology,
    tagger: Option<&dyn ProductSpanTagger>,
) -> QueryAnnotation {
    let tokens = normalize_tokens(query);
    let mut labels = vec![EntityLabel::Other; tokens.len()];
    let mut ann = QueryAnnotation {
        query: query.to_owned(),
        tokens: Vec::new(),
        labels: Vec::new(),
        product_ids: Vec::new(),
        brand_ids: Vec::new(),
        attribute_ids: Vec::new(),
        numeric_values: Vec::new(),
        unresolved_products: Vec::new(),
        default_product_from: None,
        fallback: true,
    };

    let numeric = scan_numeric(&tokens, ontology.units());
    let mut numeric_at: HashMap<usize, (usize, NumericValue)> = numeric
        .into_iter()
        .map(|(s, e, v)| (s, (e, v)))
        .collect();

    let mut i = 0;
    while i < tokens.len() {
        if let Some((end, value)) = numeric_at.remove(&i) {
            labels[i..end].fill(EntityLabel::NumericAttr);
            ann.numeric_values.push(value);
            i = end;
            continue;
        }
        let matches = ontology.resolve_term(&tokens[i..]);
        let best = matches
            .iter()
            .filter(|m| m.len == matches[0].len)
            .min_by(|a, b| a.kind.cmp(&b.kind).then_with(|| a.id.cmp(&b.id)));
        let Some(m) = best else {
            i += 1;
            continue;
        };
        let label = match m.kind {
            ConceptKind::Product => {
                push_unique(&mut ann.product_ids, &m.id);
                EntityLabel::Product(Some(m.id.clone()))
            }
            ConceptKind::Brand => {
                push_unique(&mut ann.brand_ids, &m.id);
                EntityLabel::Brand(m.id.clone())
            }
            ConceptKind::Attribute => {
                push_unique(&mut ann.attribute_ids, &m.id);
                let subclass = ontology
                    .concept(&m.id)
                    .and_then(|c| c.attribute_subclass.clone())
                    .unwrap_or_default();
                EntityLabel::Attribute {
                    id: m.id.clone(),
                    subclass,
                }
            }
        };
        labels[i..i + m.len].fill(label);
        i += m.len;
    }

    if ann.product_ids.is_empty() {
        if let Some(tagger) = tagger {
            for (start, end) in tagger.product_spans(&tokens) {
                if start >= end || end > tokens.len() {
                    continue;
                }
                if !labels[start..end].iter().all(|l| *l == EntityLabel::Other) {
                    continue;
                }
                let span = &tokens[start..end];
                let resolved = ontology
                    .resolve_term(span)
                    .into_iter()
                    .find(|m| m.len == span.len() && m.kind == ConceptKind::Product)
                    .map(|m| m.id);
                match &resolved {
                    Some(id) => push_unique(&mut ann.product_ids, id),
                    None => ann.unresolved_products.push(span.join(" ")),
                }
                labels[start..end].fill(EntityLabel::Product(resolved));
            }
        }
    }

    ann.fallback = ann.product_ids.is_empty();
    ann.tokens = tokens;
    ann.labels = labels;
    ann
}

/// Injects the default product of a recognized brand when the query names
/// no product.
pub fn apply_default_product(annotation: &QueryAnnotation, ontology: &Ontology) -> QueryAnnotation {
    let mut out = annotation.clone();
    if !out.product_ids.is_empty() {
        return out;
    }
    for brand in &annotation.brand_ids {
        if let Some(product) = ontology.default_product(brand) {
            push_unique(&mut out.product_ids, product);
            out.default_product_from.get_or_insert_with(|| brand.clone());
        }
    }
    out.fallback = out.product_ids.is_empty();
    out
}

fn push_unique(ids: &mut Vec<ConceptId>, id: &ConceptId) {
    if !ids.contains(id) {
        ids.push(id.clone());
    }
}
