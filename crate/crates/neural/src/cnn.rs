//! Per-token product classifier: stacked same-padded convolutions with
//! ReLU, a per-position hidden dense layer, and a sigmoid output.
//!
//! Only the real tokens of a query are fed through the network, so the
//! output never depends on what sits in padded positions.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use ontoshop_core::candidates::CandidateList;
use ontoshop_core::features::{FeatureContext, FeatureSequence, FEATURE_DIM};
use ontoshop_core::labeled::LabeledQuery;
use ontoshop_core::pos::PosTable;

use crate::activation::{bce_with_logit, relu_backward, relu_in_place, sigmoid};
use crate::adam::{Adam, AdamConfig};
use crate::checkpoint::Checkpoint;
use crate::error::{NeuralError, Result};
use crate::layers::{Conv1d, Dense};
use crate::params::{visit_child, visit_child_mut, Params};
use crate::tensor::Tensor;

pub const CHECKPOINT_KIND: &str = "cnn";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CnnConfig {
    /// Filter width of each convolution layer, all odd.
    pub widths: Vec<usize>,
    /// Filters per convolution layer.
    pub filters: usize,
    /// Queries are truncated to this many tokens.
    pub max_len: usize,
    /// Width of the per-position dense layer before the output.
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    /// Probability at or above which a token is a product candidate.
    pub threshold: f64,
    pub optimizer: AdamConfig,
    pub seed: u64,
}

impl Default for CnnConfig {
    fn default() -> Self {
        CnnConfig {
            widths: vec![7, 5, 3],
            filters: 32,
            max_len: 16,
            hidden: 16,
            epochs: 20,
            batch_size: 16,
            threshold: 0.5,
            optimizer: AdamConfig::default(),
            seed: 17,
        }
    }
}

impl CnnConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(NeuralError::Config(m.to_owned()));
        if self.widths.is_empty() || self.widths.iter().any(|w| w % 2 == 0) {
            return bad("widths must be a non-empty list of odd numbers");
        }
        if self.filters == 0 || self.hidden == 0 || self.max_len == 0 || self.batch_size == 0 {
            return bad("filters, hidden, max_len and batch_size must be positive");
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return bad("threshold must lie in [0, 1]");
        }
        self.optimizer.validate()
    }
}

/// The trainable layers.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnNet {
    pub convs: Vec<Conv1d>,
    pub hidden: Dense,
    pub output: Dense,
}

/// Activations of one forward pass: `layers[0]` is the input and
/// `layers[k + 1]` the rectified output of convolution `k`.
#[derive(Debug, Clone)]
pub struct CnnTrace {
    pub layers: Vec<Vec<Vec<f64>>>,
    pub hidden: Vec<Vec<f64>>,
    pub logits: Vec<f64>,
}

impl CnnNet {
    /// Glorot-initialized hidden layers and a zero output layer, so an
    /// untrained model outputs 0.5 everywhere.
    pub fn new(input: usize, config: &CnnConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        let mut convs = Vec::with_capacity(config.widths.len());
        let mut channels = input;
        for &w in &config.widths {
            convs.push(Conv1d::glorot(channels, config.filters, w, rng)?);
            channels = config.filters;
        }
        Ok(CnnNet {
            convs,
            hidden: Dense::glorot(channels, config.hidden, rng),
            output: Dense::zeros(config.hidden, 1),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.convs[0].in_channels()
    }

    pub fn forward(&self, rows: &[Vec<f64>]) -> CnnTrace {
        let mut layers = vec![rows.to_vec()];
        for conv in &self.convs {
            let mut y = conv.forward_rows(layers.last().expect("input layer"));
            y.iter_mut().for_each(|r| relu_in_place(r));
            layers.push(y);
        }
        let hidden: Vec<Vec<f64>> = layers
            .last()
            .expect("input layer")
            .iter()
            .map(|r| {
                let mut h = self.hidden.forward_row(r);
                relu_in_place(&mut h);
                h
            })
            .collect();
        let logits = hidden.iter().map(|h| self.output.forward_row(h)[0]).collect();
        CnnTrace {
            layers,
            hidden,
            logits,
        }
    }

    /// Adds the gradient of `Σ_t grad_logits[t] · logit_t` into `grads`
    /// and returns it with respect to the input rows.
    pub fn backward(&self, trace: &CnnTrace, grad_logits: &[f64], grads: &mut CnnNet) -> Vec<Vec<f64>> {
        let top = trace.layers.last().expect("input layer");
        let mut grad: Vec<Vec<f64>> = (0..grad_logits.len())
            .map(|t| {
                let gh = self
                    .output
                    .backward_row(&trace.hidden[t], &[grad_logits[t]], &mut grads.output);
                let gz = relu_backward(&trace.hidden[t], &gh);
                self.hidden.backward_row(&top[t], &gz, &mut grads.hidden)
            })
            .collect();
        for k in (0..self.convs.len()).rev() {
            let gz: Vec<Vec<f64>> = trace.layers[k + 1]
                .iter()
                .zip(&grad)
                .map(|(out, g)| relu_backward(out, g))
                .collect();
            grad = self.convs[k].backward_rows(&trace.layers[k], &gz, &mut grads.convs[k]);
        }
        grad
    }

    /// Summed binary cross-entropy of one sequence; adds `scale` times its
    /// gradient into `grads`.
    pub fn loss_backward(&self, rows: &[Vec<f64>], labels: &[bool], scale: f64, grads: &mut CnnNet) -> f64 {
        let trace = self.forward(rows);
        let mut loss = 0.0;
        let grad_logits: Vec<f64> = trace
            .logits
            .iter()
            .zip(labels)
            .map(|(&z, &y)| {
                let (l, g) = bce_with_logit(z, if y { 1.0 } else { 0.0 });
                loss += l;
                g * scale
            })
            .collect();
        self.backward(&trace, &grad_logits, grads);
        loss
    }

    pub fn loss(&self, rows: &[Vec<f64>], labels: &[bool]) -> f64 {
        self.forward(rows)
            .logits
            .iter()
            .zip(labels)
            .map(|(&z, &y)| bce_with_logit(z, if y { 1.0 } else { 0.0 }).0)
            .sum()
    }
}

impl Params for CnnNet {
    fn visit(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        for (k, conv) in self.convs.iter().enumerate() {
            visit_child(conv, &format!("conv{k}"), f);
        }
        visit_child(&self.hidden, "hidden", f);
        visit_child(&self.output, "output", f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        for (k, conv) in self.convs.iter_mut().enumerate() {
            visit_child_mut(conv, &format!("conv{k}"), f);
        }
        visit_child_mut(&mut self.hidden, "hidden", f);
        visit_child_mut(&mut self.output, "output", f);
    }
}

/// Per-feature standardization fitted on the training tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Standardizer {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    /// Constant features keep a unit scale.
    pub fn fit(rows: &[&[f64]], dim: usize) -> Self {
        if rows.is_empty() {
            return Standardizer::identity(dim);
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            mean.iter_mut().zip(*r).for_each(|(m, x)| *m += x / n);
        }
        let mut var = vec![0.0; dim];
        for r in rows {
            for k in 0..dim {
                var[k] += (r[k] - mean[k]).powi(2) / n;
            }
        }
        let std = var
            .into_iter()
            .map(|v| if v.sqrt() > 1e-12 { v.sqrt() } else { 1.0 })
            .collect();
        Standardizer { mean, std }
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((x, m), s)| (x - m) / s)
            .collect()
    }
}

/// Real-token rows of a query with their labels.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<bool>,
}

fn real_rows(seq: &FeatureSequence) -> Vec<Vec<f64>> {
    seq.features
        .iter()
        .zip(&seq.mask)
        .take_while(|(_, m)| **m)
        .map(|(f, _)| f.to_vec())
        .collect()
}

/// Feature rows for labeled queries, truncated to `max_len` tokens.
pub fn build_examples(
    data: &[LabeledQuery],
    pos: &PosTable,
    context: &FeatureContext,
    max_len: usize,
) -> Result<Vec<TrainingExample>> {
    data.iter()
        .filter(|q| !q.tokens.is_empty())
        .map(|q| {
            let seq = context.sequence(&q.tokens, pos, max_len)?;
            let rows = real_rows(&seq);
            let labels = q.labels[..rows.len()].to_vec();
            Ok(TrainingExample { rows, labels })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnnTagger {
    pub config: CnnConfig,
    pub net: CnnNet,
    pub standardizer: Standardizer,
}

impl CnnTagger {
    /// Untrained model with identity standardization.
    pub fn new(config: CnnConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let net = CnnNet::new(FEATURE_DIM, &config, &mut rng)?;
        Ok(CnnTagger {
            config,
            net,
            standardizer: Standardizer::identity(FEATURE_DIM),
        })
    }

    /// Minimizes mean per-token cross-entropy with Adam over shuffled
    /// mini-batches. Returns the model and the mean loss of the last epoch.
    pub fn train(examples: &[TrainingExample], config: CnnConfig) -> Result<(Self, f64)> {
        let examples: Vec<&TrainingExample> = examples.iter().filter(|e| !e.rows.is_empty()).collect();
        if examples.is_empty() {
            return Err(NeuralError::EmptyDataset);
        }
        if let Some(bad) = examples.iter().find(|e| e.rows[0].len() != FEATURE_DIM) {
            return Err(NeuralError::shape("cnn_train", &[FEATURE_DIM], &[bad.rows[0].len()]));
        }
        let mut tagger = CnnTagger::new(config)?;
        let all_rows: Vec<&[f64]> = examples
            .iter()
            .flat_map(|e| e.rows.iter().map(Vec::as_slice))
            .collect();
        tagger.standardizer = Standardizer::fit(&all_rows, FEATURE_DIM);
        let inputs: Vec<Vec<Vec<f64>>> = examples
            .iter()
            .map(|e| e.rows.iter().map(|r| tagger.standardizer.apply(r)).collect())
            .collect();

        let config = &tagger.config;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
        let mut adam = Adam::new(config.optimizer, tagger.net.param_count())?;
        let mut order: Vec<usize> = (0..examples.len()).collect();
        let mut last_loss = f64::NAN;
        for _ in 0..config.epochs {
            order.shuffle(&mut rng);
            let (mut total, mut tokens) = (0.0, 0usize);
            for batch in order.chunks(config.batch_size) {
                let count: usize = batch.iter().map(|&i| inputs[i].len()).sum();
                let scale = 1.0 / count as f64;
                let mut grads = tagger.net.zeros_like();
                for &i in batch {
                    total += tagger
                        .net
                        .loss_backward(&inputs[i], &examples[i].labels, scale, &mut grads);
                }
                tokens += count;
                adam.step(&mut tagger.net, &grads);
            }
            last_loss = total / tokens as f64;
        }
        if config.epochs == 0 {
            last_loss = examples
                .iter()
                .zip(&inputs)
                .map(|(e, x)| tagger.net.loss(x, &e.labels))
                .sum::<f64>()
                / all_rows.len() as f64;
        }
        Ok((tagger, last_loss))
    }

    /// Product probability of each raw feature row.
    pub fn probabilities(&self, rows: &[Vec<f64>]) -> Vec<f64> {
        let x: Vec<Vec<f64>> = rows.iter().map(|r| self.standardizer.apply(r)).collect();
        self.net.forward(&x).logits.into_iter().map(sigmoid).collect()
    }

    /// One entry per position; `None` where the mask is false.
    pub fn predict(&self, seq: &FeatureSequence) -> Result<Vec<Option<f64>>> {
        if seq.features.len() != seq.mask.len() {
            return Err(NeuralError::shape("cnn_predict", &[seq.features.len()], &[seq.mask.len()]));
        }
        let real = real_rows(seq);
        let mut out: Vec<Option<f64>> = self.probabilities(&real).into_iter().map(Some).collect();
        out.resize(seq.features.len(), None);
        Ok(out)
    }

    /// Probabilities for the first `max_len` tokens of a query.
    pub fn predict_tokens<S: AsRef<str>>(
        &self,
        tokens: &[S],
        pos: &PosTable,
        context: &FeatureContext,
    ) -> Result<Vec<f64>> {
        if tokens.is_empty() {
            return Ok(Vec::new());
        }
        let seq = context.sequence(tokens, pos, self.config.max_len)?;
        Ok(self.probabilities(&real_rows(&seq)))
    }

    /// Tokens at or above the threshold, counted once per query that
    /// flags them. Queries are scored in parallel.
    pub fn extract_candidates(
        &self,
        queries: &[Vec<String>],
        pos: &PosTable,
        context: &FeatureContext,
    ) -> Result<CandidateList> {
        let flagged: Vec<BTreeSet<String>> = queries
            .par_iter()
            .map(|q| {
                let probs = self.predict_tokens(q, pos, context)?;
                Ok(q.iter()
                    .zip(probs)
                    .filter(|(_, p)| *p >= self.config.threshold)
                    .map(|(t, _)| t.clone())
                    .collect())
            })
            .collect::<Result<_>>()?;
        Ok(CandidateList::from_terms(flagged.into_iter().flatten()))
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ckpt = Checkpoint::capture(CHECKPOINT_KIND, &self.config, &self.net);
        let dim = self.standardizer.mean.len();
        for (name, values) in [("standardizer.mean", &self.standardizer.mean), ("standardizer.std", &self.standardizer.std)] {
            ckpt.params.insert(
                name.to_owned(),
                Tensor::new(vec![dim], values.clone()).expect("non-empty"),
            );
        }
        ckpt
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        ckpt.expect_kind(CHECKPOINT_KIND)?;
        let mut ckpt = ckpt.clone();
        let config: CnnConfig = ckpt.config()?;
        let mut tagger = CnnTagger::new(config)?;
        let mean = ckpt.take("standardizer.mean")?;
        let std = ckpt.take("standardizer.std")?;
        for t in [&mean, &std] {
            t.check_shape("standardizer", &[FEATURE_DIM])?;
        }
        tagger.standardizer = Standardizer {
            mean: mean.data,
            std: std.data,
        };
        ckpt.restore(&mut tagger.net)?;
        Ok(tagger)
    }
}
