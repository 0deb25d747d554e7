//! Bipartite query→SKU click graph: ingestion from click logs, cleaning
//! into G', and connected components.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::BufRead;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::normalize_tokens;

pub const CLICK_LOG_HEADER: &str = "query\tsku_id\tsku_title\tcategory\tclicks";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryNode {
    pub id: usize,
    /// The query exactly as logged.
    pub raw: String,
    /// Normalized, stemmed tokens; never empty.
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkuNode {
    pub id: usize,
    pub sku_id: String,
    pub title: String,
    pub category: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClickEdge {
    pub query: usize,
    pub sku: usize,
    pub weight: f64,
}

/// One click-log row.
#[derive(Debug, Clone, PartialEq)]
pub struct ClickRecord {
    pub query: String,
    pub sku_id: String,
    pub sku_title: String,
    pub category: String,
    pub clicks: f64,
}

impl ClickRecord {
    pub fn new(query: &str, sku_id: &str, sku_title: &str, category: &str, clicks: f64) -> Self {
        ClickRecord {
            query: query.to_owned(),
            sku_id: sku_id.to_owned(),
            sku_title: sku_title.to_owned(),
            category: category.to_owned(),
            clicks,
        }
    }

    pub fn to_tsv_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}",
            self.query, self.sku_id, self.sku_title, self.category, self.clicks
        )
    }
}

/// Streams click-log rows from TSV. Row numbers in errors are 1-based file
/// lines (the header is line 1).
pub fn read_click_log<'a, R: BufRead + 'a>(
    reader: R,
    origin: &'a str,
) -> impl Iterator<Item = Result<ClickRecord>> + 'a {
    let origin = origin.to_owned();
    let mut lines = reader.lines().enumerate();
    let header = match lines.next() {
        Some((_, Ok(h))) if h.trim_end_matches('\r') == CLICK_LOG_HEADER => None,
        Some((_, Ok(h))) => Some(Err(Error::format(
            format!("{origin}:1"),
            format!("expected header `{CLICK_LOG_HEADER}`, found `{h}`"),
        ))),
        Some((_, Err(e))) => Some(Err(Error::io(&origin, e))),
        None => Some(Err(Error::format(format!("{origin}:1"), "empty click log"))),
    };
    let rows = lines.filter_map(move |(idx, line)| {
        let lineno = idx + 1;
        let line = match line {
            Ok(l) => l,
            Err(e) => return Some(Err(Error::io(&origin, e))),
        };
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            return None;
        }
        Some(parse_row(line, &format!("{origin}:{lineno}")))
    });
    header.into_iter().chain(rows)
}

fn parse_row(line: &str, location: &str) -> Result<ClickRecord> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 5 {
        return Err(Error::format(
            location,
            format!("expected 5 tab-separated fields, found {}", fields.len()),
        ));
    }
    let clicks: f64 = fields[4]
        .trim()
        .parse()
        .map_err(|_| Error::format(location, format!("clicks `{}` is not a number", fields[4])))?;
    if !clicks.is_finite() || clicks < 0.0 {
        return Err(Error::format(location, "clicks must be a finite non-negative number"));
    }
    if fields[1].is_empty() {
        return Err(Error::format(location, "empty sku_id"));
    }
    Ok(ClickRecord::new(fields[0], fields[1], fields[2], fields[3], clicks))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum EntropyUnit {
    #[default]
    Bits,
    Nats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CleanConfig {
    /// Edges with weight strictly below this are dropped.
    pub weight_threshold: f64,
    /// Queries whose category entropy exceeds this are "broad".
    pub entropy_max: f64,
    pub entropy_unit: EntropyUnit,
    /// Phrases that, matched against a whole query, mark it brand-only.
    pub brand_lexicon: BTreeSet<String>,
    pub prepositions: BTreeSet<String>,
}

impl Default for CleanConfig {
    fn default() -> Self {
        CleanConfig {
            weight_threshold: 2.0,
            entropy_max: 1.5,
            entropy_unit: EntropyUnit::Bits,
            brand_lexicon: BTreeSet::new(),
            prepositions: crate::ontology::DEFAULT_PREPOSITIONS
                .iter()
                .map(|s| s.to_string())
                .collect(),
        }
    }
}

impl CleanConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let json = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&json).map_err(|e| {
            Error::format(format!("{}:{}:{}", path.display(), e.line(), e.column()), e.to_string())
        })
    }
}

/// A connected component of the click graph. Ids are sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    pub queries: Vec<usize>,
    pub skus: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct GraphDoc {
    queries: Vec<QueryNode>,
    skus: Vec<SkuNode>,
    edges: Vec<ClickEdge>,
}

/// Weighted bipartite graph. Edges are kept sorted by (query, sku) and
/// node ids are dense indices into `queries`/`skus`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "GraphDoc", into = "GraphDoc")]
pub struct ClickGraph {
    queries: Vec<QueryNode>,
    skus: Vec<SkuNode>,
    edges: Vec<ClickEdge>,
    by_query: Vec<Range<usize>>,
}

impl From<GraphDoc> for ClickGraph {
    fn from(doc: GraphDoc) -> Self {
        ClickGraph::from_parts(doc.queries, doc.skus, doc.edges)
    }
}

impl From<ClickGraph> for GraphDoc {
    fn from(g: ClickGraph) -> Self {
        GraphDoc {
            queries: g.queries,
            skus: g.skus,
            edges: g.edges,
        }
    }
}

impl ClickGraph {
    fn from_parts(queries: Vec<QueryNode>, skus: Vec<SkuNode>, mut edges: Vec<ClickEdge>) -> Self {
        edges.sort_by_key(|e| (e.query, e.sku));
        let mut by_query = vec![0..0; queries.len()];
        let mut start = 0;
        while start < edges.len() {
            let q = edges[start].query;
            let end = start + edges[start..].iter().take_while(|e| e.query == q).count();
            if q < by_query.len() {
                by_query[q] = start..end;
            }
            start = end;
        }
        ClickGraph {
            queries,
            skus,
            edges,
            by_query,
        }
    }

    /// Aggregates click rows into a graph. Duplicate (query, sku) rows are
    /// summed, zero-click rows and queries that normalize to nothing are
    /// dropped, and node ids follow first-seen order.
    pub fn ingest<I>(records: I) -> Result<Self>
    where
        I: IntoIterator<Item = Result<ClickRecord>>,
    {
        let mut queries: Vec<QueryNode> = Vec::new();
        let mut skus: Vec<SkuNode> = Vec::new();
        let mut query_ids: HashMap<String, usize> = HashMap::new();
        let mut sku_ids: HashMap<String, usize> = HashMap::new();
        let mut weights: BTreeMap<(usize, usize), f64> = BTreeMap::new();

        for record in records {
            let r = record?;
            if r.clicks <= 0.0 {
                continue;
            }
            let q = match query_ids.get(&r.query) {
                Some(&q) => q,
                None => {
                    let tokens = normalize_tokens(&r.query);
                    if tokens.is_empty() {
                        continue;
                    }
                    let q = queries.len();
                    queries.push(QueryNode {
                        id: q,
                        raw: r.query.clone(),
                        tokens,
                    });
                    query_ids.insert(r.query.clone(), q);
                    q
                }
            };
            let s = *sku_ids.entry(r.sku_id.clone()).or_insert_with(|| {
                skus.push(SkuNode {
                    id: skus.len(),
                    sku_id: r.sku_id.clone(),
                    title: r.sku_title.clone(),
                    category: r.category.clone(),
                });
                skus.len() - 1
            });
            *weights.entry((q, s)).or_insert(0.0) += r.clicks;
        }

        let edges = weights
            .into_iter()
            .map(|((query, sku), weight)| ClickEdge { query, sku, weight })
            .collect();
        Ok(ClickGraph::from_parts(queries, skus, edges))
    }

    pub fn from_tsv_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let origin = path.display().to_string();
        ClickGraph::ingest(read_click_log(std::io::BufReader::new(file), &origin))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let json = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&json).map_err(|e| {
            Error::format(format!("{}:{}:{}", path.display(), e.line(), e.column()), e.to_string())
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string(self).expect("graphs always serialize");
        std::fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn queries(&self) -> &[QueryNode] {
        &self.queries
    }

    pub fn skus(&self) -> &[SkuNode] {
        &self.skus
    }

    pub fn edges(&self) -> &[ClickEdge] {
        &self.edges
    }

    pub fn query(&self, id: usize) -> &QueryNode {
        &self.queries[id]
    }

    pub fn sku(&self, id: usize) -> &SkuNode {
        &self.skus[id]
    }

    pub fn query_edges(&self, query: usize) -> &[ClickEdge] {
        &self.edges[self.by_query[query].clone()]
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Shannon entropy (bits) of the query's click weight across SKU categories.
    pub fn category_entropy(&self, query: usize) -> Result<f64> {
        entropy_bits(self.query_edges(query).iter().map(|e| (e.sku, e.weight)), &self.skus)
            .ok_or(Error::IsolatedNode(query))
    }

    /// Produces G': drops light edges, broad queries, brand-only queries
    /// and then isolated nodes, in that order. Ids are re-densified
    /// preserving relative order.
    pub fn clean(&self, config: &CleanConfig) -> ClickGraph {
        let heavy: Vec<ClickEdge> = self
            .edges
            .iter()
            .filter(|e| e.weight >= config.weight_threshold)
            .copied()
            .collect();

        let mut per_query: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
        for e in &heavy {
            per_query.entry(e.query).or_default().push((e.sku, e.weight));
        }
        let scale = match config.entropy_unit {
            EntropyUnit::Bits => 1.0,
            EntropyUnit::Nats => std::f64::consts::LN_2,
        };
        let brands: HashSet<Vec<String>> = config
            .brand_lexicon
            .iter()
            .map(|b| normalize_tokens(b))
            .filter(|b| !b.is_empty())
            .collect();

        let keep_query: HashSet<usize> = per_query
            .into_iter()
            .filter(|(_, edges)| {
                let h = entropy_bits(edges.iter().copied(), &self.skus).unwrap_or(0.0) * scale;
                h <= config.entropy_max
            })
            .map(|(q, _)| q)
            .filter(|q| !brands.contains(&self.queries[*q].tokens))
            .collect();

        let surviving: Vec<ClickEdge> = heavy
            .into_iter()
            .filter(|e| keep_query.contains(&e.query))
            .collect();
        self.induced(surviving)
    }

    /// Rebuilds a graph from a subset of this graph's edges, keeping only
    /// nodes that still have an edge.
    fn induced(&self, edges: Vec<ClickEdge>) -> ClickGraph {
        let used_q: BTreeSet<usize> = edges.iter().map(|e| e.query).collect();
        let used_s: BTreeSet<usize> = edges.iter().map(|e| e.sku).collect();
        let q_map: HashMap<usize, usize> = used_q.iter().enumerate().map(|(n, &o)| (o, n)).collect();
        let s_map: HashMap<usize, usize> = used_s.iter().enumerate().map(|(n, &o)| (o, n)).collect();
        let queries = used_q
            .iter()
            .map(|&o| QueryNode {
                id: q_map[&o],
                ..self.queries[o].clone()
            })
            .collect();
        let skus = used_s
            .iter()
            .map(|&o| SkuNode {
                id: s_map[&o],
                ..self.skus[o].clone()
            })
            .collect();
        let edges = edges
            .into_iter()
            .map(|e| ClickEdge {
                query: q_map[&e.query],
                sku: s_map[&e.sku],
                weight: e.weight,
            })
            .collect();
        ClickGraph::from_parts(queries, skus, edges)
    }

    /// Keeps only edges into SKUs of `category` (and the nodes they touch).
    pub fn restrict_to_category(&self, category: &str) -> ClickGraph {
        let edges = self
            .edges
            .iter()
            .filter(|e| self.skus[e.sku].category == category)
            .copied()
            .collect();
        self.induced(edges)
    }

    /// Components over non-isolated nodes, ordered by smallest query id.
    pub fn connected_components(&self) -> Vec<Component> {
        let nq = self.queries.len();
        let mut dsu = DisjointSets::new(nq + self.skus.len());
        for e in &self.edges {
            dsu.union(e.query, nq + e.sku);
        }
        let mut groups: BTreeMap<usize, Component> = BTreeMap::new();
        let mut root_to_key: HashMap<usize, usize> = HashMap::new();
        for q in 0..nq {
            if self.by_query[q].is_empty() {
                continue;
            }
            let root = dsu.find(q);
            let key = *root_to_key.entry(root).or_insert(q);
            groups
                .entry(key)
                .or_insert_with(|| Component {
                    queries: Vec::new(),
                    skus: Vec::new(),
                })
                .queries
                .push(q);
        }
        let touched: BTreeSet<usize> = self.edges.iter().map(|e| e.sku).collect();
        for s in touched {
            let root = dsu.find(nq + s);
            if let Some(key) = root_to_key.get(&root) {
                groups.get_mut(key).expect("key registered").skus.push(s);
            }
        }
        groups.into_values().collect()
    }
}

fn entropy_bits<I>(edges: I, skus: &[SkuNode]) -> Option<f64>
where
    I: IntoIterator<Item = (usize, f64)>,
{
    let mut by_category: BTreeMap<&str, f64> = BTreeMap::new();
    let mut total = 0.0;
    for (sku, w) in edges {
        *by_category.entry(skus[sku].category.as_str()).or_insert(0.0) += w;
        total += w;
    }
    if by_category.is_empty() || total <= 0.0 {
        return None;
    }
    let h: f64 = by_category
        .values()
        .filter(|w| **w > 0.0)
        .map(|w| {
            let p = w / total;
            -p * p.log2()
        })
        .sum();
    Some(h.max(0.0))
}

struct DisjointSets {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        DisjointSets {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}
