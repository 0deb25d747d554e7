//! Token-graph product heuristic: within a click-graph component, link
//! adjacent query tokens and take the token with the largest share of
//! incoming edge weight as that component's product.

use std::collections::{BTreeMap, HashMap, HashSet};

use rayon::prelude::*;

use crate::candidates::CandidateList;
use crate::clickgraph::{ClickGraph, Component};
use crate::error::{Error, Result};

/// Prefix of `tokens` before the first preposition.
pub fn truncate_at_preposition<S: AsRef<str>>(
    tokens: &[S],
    prepositions: &HashSet<String>,
) -> Vec<String> {
    tokens
        .iter()
        .map(AsRef::as_ref)
        .take_while(|t| !prepositions.contains(*t))
        .map(str::to_owned)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioScore {
    pub n_in: u64,
    pub n_out: u64,
    pub ratio: f64,
}

impl RatioScore {
    pub fn new(n_in: u64, n_out: u64) -> Self {
        let ratio = if n_in + n_out == 0 {
            0.5
        } else {
            n_in as f64 / (n_in + n_out) as f64
        };
        RatioScore { n_in, n_out, ratio }
    }
}

/// Directed graph over the distinct tokens of a set of queries; edge
/// weights count adjacent occurrences.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TokenGraph {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    edges: BTreeMap<(usize, usize), u64>,
    n_in: Vec<u64>,
    n_out: Vec<u64>,
}

impl TokenGraph {
    pub fn build<Q, S>(queries: &[Q]) -> Self
    where
        Q: AsRef<[S]>,
        S: AsRef<str>,
    {
        let mut g = TokenGraph::default();
        for q in queries {
            let ids: Vec<usize> = q.as_ref().iter().map(|t| g.node(t.as_ref())).collect();
            for pair in ids.windows(2) {
                *g.edges.entry((pair[0], pair[1])).or_insert(0) += 1;
                g.n_out[pair[0]] += 1;
                g.n_in[pair[1]] += 1;
            }
        }
        g
    }

    fn node(&mut self, token: &str) -> usize {
        if let Some(&i) = self.index.get(token) {
            return i;
        }
        let i = self.tokens.len();
        self.tokens.push(token.to_owned());
        self.index.insert(token.to_owned(), i);
        self.n_in.push(0);
        self.n_out.push(0);
        i
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    /// `(from, to, weight)` triples in token-index order.
    pub fn edges(&self) -> impl Iterator<Item = (&str, &str, u64)> + '_ {
        self.edges
            .iter()
            .map(|(&(a, b), &w)| (self.tokens[a].as_str(), self.tokens[b].as_str(), w))
    }

    pub fn edge_weight(&self, from: &str, to: &str) -> u64 {
        match (self.index.get(from), self.index.get(to)) {
            (Some(&a), Some(&b)) => self.edges.get(&(a, b)).copied().unwrap_or(0),
            _ => 0,
        }
    }

    pub fn score(&self, token: &str) -> Option<RatioScore> {
        self.index
            .get(token)
            .map(|&i| RatioScore::new(self.n_in[i], self.n_out[i]))
    }

    /// Multiplies every edge weight by `factor`.
    pub fn scaled(&self, factor: u64) -> TokenGraph {
        let mut g = self.clone();
        g.edges.values_mut().for_each(|w| *w *= factor);
        g.n_in.iter_mut().for_each(|w| *w *= factor);
        g.n_out.iter_mut().for_each(|w| *w *= factor);
        g
    }

    /// The token maximizing `n_in / (n_in + n_out)`; ties go to the larger
    /// total degree, then to the lexicographically smaller token.
    pub fn product_candidate(&self) -> Result<(String, RatioScore)> {
        (0..self.tokens.len())
            .map(|i| (&self.tokens[i], RatioScore::new(self.n_in[i], self.n_out[i])))
            .max_by(|(ta, a), (tb, b)| {
                a.ratio
                    .total_cmp(&b.ratio)
                    .then((a.n_in + a.n_out).cmp(&(b.n_in + b.n_out)))
                    .then_with(|| tb.cmp(ta))
            })
            .map(|(t, s)| (t.clone(), s))
            .ok_or(Error::EmptyComponent)
    }
}

/// Token graph of a component's queries, each cut at its first preposition.
pub fn component_token_graph(
    graph: &ClickGraph,
    component: &Component,
    prepositions: &HashSet<String>,
) -> TokenGraph {
    let truncated: Vec<Vec<String>> = component
        .queries
        .iter()
        .map(|&q| truncate_at_preposition(&graph.query(q).tokens, prepositions))
        .filter(|t| !t.is_empty())
        .collect();
    TokenGraph::build(&truncated)
}

/// One product candidate per component of G', counted across components.
pub fn extract_all(graph: &ClickGraph, prepositions: &HashSet<String>) -> CandidateList {
    let components = graph.connected_components();
    let winners: Vec<String> = components
        .par_iter()
        .filter_map(|c| {
            component_token_graph(graph, c, prepositions)
                .product_candidate()
                .ok()
                .map(|(t, _)| t)
        })
        .collect();
    CandidateList::from_terms(winners)
}
