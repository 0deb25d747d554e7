//! The search-side ontology: Product, Brand and Attribute concepts, a
//! single-parent is-a forest, and the slots that link them.
//!
//! An [`Ontology`] is immutable once built. It is constructed from an
//! [`OntologyDocument`] (the on-disk JSON shape), which is where edits
//! happen; [`Ontology::new`] then derives the child index and the
//! normalized lexicon used by [`Ontology::resolve_term`].

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{canonical_phrase, normalize_tokens, stem_token};

/// Prepositions used for query truncation when an ontology file does not
/// list its own.
pub const DEFAULT_PREPOSITIONS: &[&str] = &[
    "about", "at", "by", "for", "from", "in", "into", "of", "on", "to", "under", "with",
    "without",
];

/// Lowercase identifier matching `[a-z0-9_-]+`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ConceptId(String);

impl ConceptId {
    pub fn new(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        let ok = !id.is_empty()
            && id
                .bytes()
                .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_' || b == b'-');
        if ok {
            Ok(ConceptId(id))
        } else {
            Err(Error::InvalidArgument(format!(
                "concept id `{id}` must match [a-z0-9_-]+"
            )))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for ConceptId {
    type Error = String;

    fn try_from(value: String) -> std::result::Result<Self, Self::Error> {
        ConceptId::new(value).map_err(|e| e.to_string())
    }
}

impl From<ConceptId> for String {
    fn from(id: ConceptId) -> Self {
        id.0
    }
}

impl FromStr for ConceptId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ConceptId::new(s)
    }
}

impl fmt::Display for ConceptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ConceptKind {
    Product,
    Brand,
    Attribute,
}

impl fmt::Display for ConceptKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ConceptKind::Product => "Product",
            ConceptKind::Brand => "Brand",
            ConceptKind::Attribute => "Attribute",
        };
        f.write_str(s)
    }
}

/// A class in the ontology. Fields are declared in lexicographic order so
/// serialized objects come out with sorted keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Concept {
    #[serde(default)]
    pub attribute_subclass: Option<String>,
    pub id: ConceptId,
    pub kind: ConceptKind,
    pub name: String,
    #[serde(default)]
    pub parent: Option<ConceptId>,
    #[serde(default)]
    pub synonyms: Vec<String>,
}

impl Concept {
    fn with_kind(id: ConceptId, kind: ConceptKind, name: &str) -> Self {
        Concept {
            attribute_subclass: None,
            id,
            kind,
            name: canonical_phrase(name),
            parent: None,
            synonyms: Vec::new(),
        }
    }

    pub fn product(id: ConceptId, name: &str) -> Self {
        Self::with_kind(id, ConceptKind::Product, name)
    }

    pub fn brand(id: ConceptId, name: &str) -> Self {
        Self::with_kind(id, ConceptKind::Brand, name)
    }

    pub fn attribute(id: ConceptId, name: &str, subclass: &str) -> Self {
        let mut c = Self::with_kind(id, ConceptKind::Attribute, name);
        c.attribute_subclass = Some(subclass.to_owned());
        c
    }

    pub fn with_synonyms<I, S>(mut self, synonyms: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        self.synonyms
            .extend(synonyms.into_iter().map(|s| canonical_phrase(s.as_ref())));
        self
    }

    pub fn with_parent(mut self, parent: ConceptId) -> Self {
        self.parent = Some(parent);
        self
    }

    fn canonicalize(&mut self) {
        self.name = canonical_phrase(&self.name);
        for s in &mut self.synonyms {
            *s = canonical_phrase(s);
        }
        self.synonyms.sort();
    }
}

fn default_prepositions() -> BTreeSet<String> {
    DEFAULT_PREPOSITIONS.iter().map(|s| s.to_string()).collect()
}

fn default_units() -> BTreeMap<String, f64> {
    BTreeMap::from([("cm".to_owned(), 1.0), ("inch".to_owned(), 2.54)])
}

/// The JSON file shape. Field order is lexicographic so that keys come out
/// sorted on save.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OntologyDocument {
    #[serde(default)]
    pub attributes_slot: BTreeMap<ConceptId, BTreeSet<ConceptId>>,
    #[serde(default)]
    pub concepts: Vec<Concept>,
    #[serde(default)]
    pub default_product: BTreeMap<ConceptId, ConceptId>,
    #[serde(default = "default_prepositions")]
    pub prepositions: BTreeSet<String>,
    #[serde(default = "default_units")]
    pub units: BTreeMap<String, f64>,
}

impl Default for OntologyDocument {
    fn default() -> Self {
        OntologyDocument {
            attributes_slot: BTreeMap::new(),
            concepts: Vec::new(),
            default_product: BTreeMap::new(),
            prepositions: default_prepositions(),
            units: default_units(),
        }
    }
}

impl OntologyDocument {
    pub fn with_concept(mut self, concept: Concept) -> Self {
        self.concepts.push(concept);
        self
    }

    pub fn with_attribute_slot(mut self, product: ConceptId, attribute: ConceptId) -> Self {
        self.attributes_slot
            .entry(product)
            .or_default()
            .insert(attribute);
        self
    }

    pub fn with_default_product(mut self, brand: ConceptId, product: ConceptId) -> Self {
        self.default_product.insert(brand, product);
        self
    }

    fn canonicalize(&mut self) {
        for c in &mut self.concepts {
            c.canonicalize();
        }
        self.concepts.sort_by(|a, b| a.id.cmp(&b.id));
        self.prepositions = self
            .prepositions
            .iter()
            .map(|p| canonical_phrase(p))
            .collect();
    }
}

/// One broken invariant, attributed to a concept id (or slot/unit key).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Violation {
    pub concept: String,
    pub reason: ViolationReason,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum ViolationReason {
    DuplicateId,
    NameInSynonyms,
    DuplicateSynonym(String),
    UnknownParent(String),
    ParentKindMismatch { parent: String },
    Cycle(Vec<String>),
    SubclassWithoutAttributeKind,
    AttributeWithoutSubclass,
    UnknownSlotEndpoint { slot: &'static str, id: String },
    SlotDomain { slot: &'static str, expected: ConceptKind },
    SlotRange { slot: &'static str, expected: ConceptKind, id: String },
    MissingUnit(&'static str),
    BadUnitFactor,
}

impl fmt::Display for ViolationReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use ViolationReason::*;
        match self {
            DuplicateId => write!(f, "duplicate concept id"),
            NameInSynonyms => write!(f, "name repeated among synonyms"),
            DuplicateSynonym(s) => write!(f, "duplicate synonym `{s}`"),
            UnknownParent(p) => write!(f, "parent `{p}` does not exist"),
            ParentKindMismatch { parent } => {
                write!(f, "parent `{parent}` is of a different kind")
            }
            Cycle(ids) => write!(f, "cycle in is-a links: {}", ids.join(" -> ")),
            SubclassWithoutAttributeKind => {
                write!(f, "attribute_subclass set on a non-Attribute concept")
            }
            AttributeWithoutSubclass => write!(f, "Attribute concept lacks attribute_subclass"),
            UnknownSlotEndpoint { slot, id } => write!(f, "{slot}: unknown concept `{id}`"),
            SlotDomain { slot, expected } => write!(f, "{slot}: domain must be {expected}"),
            SlotRange { slot, expected, id } => {
                write!(f, "{slot}: range must be {expected} (got `{id}`)")
            }
            MissingUnit(u) => write!(f, "unit table lacks `{u}`"),
            BadUnitFactor => write!(f, "unit factor must be finite and positive"),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.concept, self.reason)
    }
}

/// A lexicon hit returned by [`Ontology::resolve_term`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermMatch {
    pub id: ConceptId,
    pub kind: ConceptKind,
    /// Number of leading phrase tokens covered by the match.
    pub len: usize,
}

#[derive(Debug, Clone)]
pub struct Ontology {
    doc: OntologyDocument,
    concepts: BTreeMap<ConceptId, Concept>,
    duplicate_ids: BTreeSet<ConceptId>,
    children: BTreeMap<ConceptId, Vec<ConceptId>>,
    lexicon: HashMap<Vec<String>, BTreeSet<ConceptId>>,
    longest_entry: usize,
    prepositions: HashSet<String>,
    units: HashMap<String, f64>,
}

impl PartialEq for Ontology {
    fn eq(&self, other: &Self) -> bool {
        self.doc == other.doc
    }
}

impl Default for Ontology {
    fn default() -> Self {
        Ontology::new(OntologyDocument::default())
    }
}

impl Ontology {
    /// Builds the derived indexes without validating. Use
    /// [`Ontology::try_new`] to refuse invalid documents.
    pub fn new(mut doc: OntologyDocument) -> Self {
        doc.canonicalize();

        let mut concepts = BTreeMap::new();
        let mut duplicate_ids = BTreeSet::new();
        for c in &doc.concepts {
            if concepts.insert(c.id.clone(), c.clone()).is_some() {
                duplicate_ids.insert(c.id.clone());
            }
        }

        let mut children: BTreeMap<ConceptId, Vec<ConceptId>> = BTreeMap::new();
        for c in concepts.values() {
            if let Some(p) = &c.parent {
                children.entry(p.clone()).or_default().push(c.id.clone());
            }
        }

        let mut lexicon: HashMap<Vec<String>, BTreeSet<ConceptId>> = HashMap::new();
        for c in concepts.values() {
            for phrase in std::iter::once(&c.name).chain(&c.synonyms) {
                let key = normalize_tokens(phrase);
                if !key.is_empty() {
                    lexicon.entry(key).or_default().insert(c.id.clone());
                }
            }
        }
        let longest_entry = lexicon.keys().map(Vec::len).max().unwrap_or(0);

        let prepositions = doc
            .prepositions
            .iter()
            .flat_map(|p| normalize_tokens(p))
            .collect();
        let units = doc
            .units
            .iter()
            .map(|(name, factor)| (stem_token(&name.to_lowercase()), *factor))
            .collect();

        Ontology {
            doc,
            concepts,
            duplicate_ids,
            children,
            lexicon,
            longest_entry,
            prepositions,
            units,
        }
    }

    pub fn try_new(doc: OntologyDocument) -> Result<Self> {
        let ontology = Ontology::new(doc);
        let violations = ontology.validate();
        if violations.is_empty() {
            Ok(ontology)
        } else {
            Err(Error::Invalid(violations))
        }
    }

    pub fn document(&self) -> &OntologyDocument {
        &self.doc
    }

    pub fn concept(&self, id: &ConceptId) -> Option<&Concept> {
        self.concepts.get(id)
    }

    pub fn concepts(&self) -> impl Iterator<Item = &Concept> {
        self.concepts.values()
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn default_product(&self, brand: &ConceptId) -> Option<&ConceptId> {
        self.doc.default_product.get(brand)
    }

    pub fn attributes_of(&self, product: &ConceptId) -> Option<&BTreeSet<ConceptId>> {
        self.doc.attributes_slot.get(product)
    }

    /// Stemmed preposition tokens.
    pub fn prepositions(&self) -> &HashSet<String> {
        &self.prepositions
    }

    /// Conversion factor of a (stemmed) unit token to the canonical unit.
    pub fn unit_factor(&self, unit: &str) -> Option<f64> {
        self.units.get(unit).copied()
    }

    pub fn units(&self) -> &HashMap<String, f64> {
        &self.units
    }

    /// Every invariant violation, sorted by concept id then reason.
    pub fn validate(&self) -> Vec<Violation> {
        use ViolationReason::*;
        let mut out = Vec::new();
        let mut push = |concept: &str, reason| {
            out.push(Violation {
                concept: concept.to_owned(),
                reason,
            })
        };

        for id in &self.duplicate_ids {
            push(id.as_str(), DuplicateId);
        }

        for c in self.concepts.values() {
            let id = c.id.as_str();
            if c.synonyms.contains(&c.name) {
                push(id, NameInSynonyms);
            }
            for pair in c.synonyms.windows(2) {
                if pair[0] == pair[1] {
                    push(id, DuplicateSynonym(pair[0].clone()));
                }
            }
            match (&c.kind, &c.attribute_subclass) {
                (ConceptKind::Attribute, None) => push(id, AttributeWithoutSubclass),
                (ConceptKind::Product | ConceptKind::Brand, Some(_)) => {
                    push(id, SubclassWithoutAttributeKind)
                }
                _ => {}
            }
            if let Some(parent) = &c.parent {
                match self.concepts.get(parent) {
                    None => push(id, UnknownParent(parent.to_string())),
                    Some(p) if p.kind != c.kind => push(
                        id,
                        ParentKindMismatch {
                            parent: parent.to_string(),
                        },
                    ),
                    Some(_) => {}
                }
            }
        }

        for cycle in self.cycles() {
            let head = cycle[0].clone();
            push(&head, Cycle(cycle));
        }

        let kind_of = |id: &ConceptId| self.concepts.get(id).map(|c| c.kind);
        for (product, attrs) in &self.doc.attributes_slot {
            let slot = "attributes";
            match kind_of(product) {
                None => push(
                    product.as_str(),
                    UnknownSlotEndpoint {
                        slot,
                        id: product.to_string(),
                    },
                ),
                Some(ConceptKind::Product) => {}
                Some(_) => push(
                    product.as_str(),
                    SlotDomain {
                        slot,
                        expected: ConceptKind::Product,
                    },
                ),
            }
            for a in attrs {
                match kind_of(a) {
                    None => push(
                        product.as_str(),
                        UnknownSlotEndpoint {
                            slot,
                            id: a.to_string(),
                        },
                    ),
                    Some(ConceptKind::Attribute) => {}
                    Some(_) => push(
                        product.as_str(),
                        SlotRange {
                            slot,
                            expected: ConceptKind::Attribute,
                            id: a.to_string(),
                        },
                    ),
                }
            }
        }

        for (brand, product) in &self.doc.default_product {
            let slot = "default_product";
            match kind_of(brand) {
                None => push(
                    brand.as_str(),
                    UnknownSlotEndpoint {
                        slot,
                        id: brand.to_string(),
                    },
                ),
                Some(ConceptKind::Brand) => {}
                Some(_) => push(
                    brand.as_str(),
                    SlotDomain {
                        slot,
                        expected: ConceptKind::Brand,
                    },
                ),
            }
            match kind_of(product) {
                None => push(
                    brand.as_str(),
                    UnknownSlotEndpoint {
                        slot,
                        id: product.to_string(),
                    },
                ),
                Some(ConceptKind::Product) => {}
                Some(_) => push(
                    brand.as_str(),
                    SlotRange {
                        slot,
                        expected: ConceptKind::Product,
                        id: product.to_string(),
                    },
                ),
            }
        }

        for required in ["cm", "inch"] {
            if !self.units.contains_key(required) {
                push(required, MissingUnit(required));
            }
        }
        for (unit, factor) in &self.doc.units {
            if !(factor.is_finite() && *factor > 0.0) {
                push(unit, BadUnitFactor);
            }
        }

        out.sort();
        out
    }

    /// Each is-a cycle once, rotated to start at its smallest id.
    fn cycles(&self) -> Vec<Vec<String>> {
        let mut done: HashSet<&ConceptId> = HashSet::new();
        let mut cycles = Vec::new();
        for start in self.concepts.keys() {
            if done.contains(start) {
                continue;
            }
            let mut path: Vec<&ConceptId> = Vec::new();
            let mut cursor = Some(start);
            while let Some(id) = cursor {
                if done.contains(id) {
                    break;
                }
                if let Some(pos) = path.iter().position(|p| *p == id) {
                    let mut cycle: Vec<String> =
                        path[pos..].iter().map(|c| c.to_string()).collect();
                    let min = (0..cycle.len()).min_by_key(|&i| &cycle[i]).unwrap_or(0);
                    cycle.rotate_left(min);
                    cycles.push(cycle);
                    break;
                }
                path.push(id);
                cursor = self.concepts.get(id).and_then(|c| c.parent.as_ref());
            }
            done.extend(path);
        }
        cycles
    }

    /// `id` plus the transitive closure of its children.
    pub fn descendants_or_self(&self, id: &ConceptId) -> Result<BTreeSet<ConceptId>> {
        if !self.concepts.contains_key(id) {
            return Err(Error::UnknownConcept(id.to_string()));
        }
        let mut seen = BTreeSet::from([id.clone()]);
        let mut stack = vec![id];
        while let Some(next) = stack.pop() {
            for child in self.children.get(next).into_iter().flatten() {
                if seen.insert(child.clone()) {
                    stack.push(child);
                }
            }
        }
        Ok(seen)
    }

    /// Concepts whose name or a synonym equals a prefix of `phrase`
    /// (normalized tokens). Longest matches first, then by id.
    pub fn resolve_term<S: AsRef<str>>(&self, phrase: &[S]) -> Vec<TermMatch> {
        let phrase: Vec<String> = phrase.iter().map(|s| s.as_ref().to_owned()).collect();
        let mut out = Vec::new();
        for len in (1..=self.longest_entry.min(phrase.len())).rev() {
            if let Some(ids) = self.lexicon.get(&phrase[..len]) {
                for id in ids {
                    out.push(TermMatch {
                        id: id.clone(),
                        kind: self.concepts[id].kind,
                        len,
                    });
                }
            }
        }
        out
    }

    pub fn from_json_str(json: &str, origin: &str) -> Result<Self> {
        let doc: OntologyDocument = serde_json::from_str(json).map_err(|e| {
            Error::format(format!("{origin}:{}:{}", e.line(), e.column()), e.to_string())
        })?;
        Ontology::try_new(doc)
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.doc)
            .expect("ontology documents always serialize");
        s.push('\n');
        s
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let json = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ontology::from_json_str(&json, &path.display().to_string())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json_string()).map_err(|e| Error::io(path, e))
    }
}
