//! Per-token input vectors for the convolutional tagger: POS distribution,
//! local token-graph degrees, and distance from the end of the query.

use std::borrow::Cow;
use std::collections::HashMap;

use crate::clickgraph::ClickGraph;
use crate::error::{Error, Result};
use crate::pos::{PosTable, PosVector, POS_TAGS};
use crate::token_graph::TokenGraph;

/// 12 POS probabilities + [n_in, n_out, ratio] + position.
pub const FEATURE_DIM: usize = POS_TAGS + 3 + 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TokenFeature {
    pub v_p: PosVector,
    pub v_g: [f64; 3],
    pub v_n: f64,
}

impl TokenFeature {
    pub fn to_array(&self) -> [f64; FEATURE_DIM] {
        let mut out = [0.0; FEATURE_DIM];
        out[..POS_TAGS].copy_from_slice(&self.v_p);
        out[POS_TAGS..POS_TAGS + 3].copy_from_slice(&self.v_g);
        out[FEATURE_DIM - 1] = self.v_n;
        out
    }
}

/// Fixed-length feature rows; `mask[i]` is true for real tokens, which
/// always form a prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    pub features: Vec<[f64; FEATURE_DIM]>,
    pub mask: Vec<bool>,
}

impl FeatureSequence {
    pub fn max_len(&self) -> usize {
        self.features.len()
    }

    /// Number of real (unmasked) tokens.
    pub fn real_len(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }
}

/// `[n_in, n_out, n_in/(n_in+n_out)]` for `token` in its local graph. A
/// single-token query gets `[1, 1, 0.5]`.
pub fn graph_vector(token: &str, graph: &TokenGraph, query_len: usize) -> Result<[f64; 3]> {
    if query_len == 1 {
        return Ok([1.0, 1.0, 0.5]);
    }
    let s = graph
        .score(token)
        .ok_or_else(|| Error::InvalidArgument(format!("token `{token}` is not in the token graph")))?;
    let ratio = if s.n_in + s.n_out == 0 { 0.0 } else { s.ratio };
    Ok([s.n_in as f64, s.n_out as f64, ratio])
}

/// `N - i` for the 1-based position `i` of an `N`-token query.
pub fn position_value(i: usize, n: usize) -> Result<f64> {
    if i == 0 || i > n {
        return Err(Error::InvalidArgument(format!(
            "position {i} out of range 1..={n}"
        )));
    }
    Ok((n - i) as f64)
}

pub fn token_features<S: AsRef<str>>(
    tokens: &[S],
    pos: &PosTable,
    graph: &TokenGraph,
) -> Result<Vec<TokenFeature>> {
    let n = tokens.len();
    tokens
        .iter()
        .enumerate()
        .map(|(i, t)| {
            Ok(TokenFeature {
                v_p: pos.pos_vector(t.as_ref()),
                v_g: graph_vector(t.as_ref(), graph, n)?,
                v_n: position_value(i + 1, n)?,
            })
        })
        .collect()
}

/// Pads with zero rows (mask false) or truncates to `max_len`.
pub fn to_sequence(features: &[TokenFeature], max_len: usize) -> FeatureSequence {
    let real = features.len().min(max_len);
    let mut rows: Vec<[f64; FEATURE_DIM]> =
        features[..real].iter().map(TokenFeature::to_array).collect();
    rows.resize(max_len, [0.0; FEATURE_DIM]);
    let mut mask = vec![true; real];
    mask.resize(max_len, false);
    FeatureSequence {
        features: rows,
        mask,
    }
}

/// Maps each query of a click graph to the token graph of its component.
/// Component graphs use the full token sequences, so tokens after a
/// preposition still get degrees.
#[derive(Debug, Clone, Default)]
pub struct FeatureContext {
    graphs: Vec<TokenGraph>,
    by_query: HashMap<Vec<String>, usize>,
}

impl FeatureContext {
    pub fn from_graph(graph: &ClickGraph) -> Self {
        let mut ctx = FeatureContext::default();
        for component in graph.connected_components() {
            let queries: Vec<&[String]> = component
                .queries
                .iter()
                .map(|&q| graph.query(q).tokens.as_slice())
                .collect();
            let idx = ctx.graphs.len();
            ctx.graphs.push(TokenGraph::build(&queries));
            for q in queries {
                ctx.by_query.entry(q.to_vec()).or_insert(idx);
            }
        }
        ctx
    }

    /// The component graph containing this query, or a graph of the query
    /// alone when it is not part of the click graph.
    pub fn graph_for<S: AsRef<str>>(&self, tokens: &[S]) -> Cow<'_, TokenGraph> {
        let key: Vec<String> = tokens.iter().map(|t| t.as_ref().to_owned()).collect();
        match self.by_query.get(&key) {
            Some(&i) => Cow::Borrowed(&self.graphs[i]),
            None => Cow::Owned(TokenGraph::build(&[key])),
        }
    }

    pub fn sequence<S: AsRef<str>>(
        &self,
        tokens: &[S],
        pos: &PosTable,
        max_len: usize,
    ) -> Result<FeatureSequence> {
        let graph = self.graph_for(tokens);
        Ok(to_sequence(&token_features(tokens, pos, &graph)?, max_len))
    }
}
