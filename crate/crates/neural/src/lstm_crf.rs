//! Word-embedding BiLSTM with a CRF over IOB product tags.
//!
//! Pre-trained embeddings are frozen and copied into the checkpoint; all
//! out-of-vocabulary tokens share one trainable vector.

use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use ontoshop_core::candidates::CandidateList;
use ontoshop_core::embeddings::EmbeddingTable;
use ontoshop_core::iob::{IobSequence, IobTag};

use crate::adam::{Adam, AdamConfig};
use crate::checkpoint::Checkpoint;
use crate::crf::{Crf, Emission, NUM_TAGS};
use crate::error::{NeuralError, Result};
use crate::layers::Dense;
use crate::lstm::{BiLstm, BiLstmCache};
use crate::params::{visit_child, visit_child_mut, Params};
use crate::tensor::Tensor;

pub const CHECKPOINT_KIND: &str = "lstm-crf";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LstmCrfConfig {
    /// Hidden size of each direction.
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: AdamConfig,
    pub seed: u64,
}

impl Default for LstmCrfConfig {
    fn default() -> Self {
        LstmCrfConfig {
            hidden: 32,
            epochs: 8,
            batch_size: 16,
            optimizer: AdamConfig {
                learning_rate: 5e-3,
                ..AdamConfig::default()
            },
            seed: 17,
        }
    }
}

impl LstmCrfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.batch_size == 0 {
            return Err(NeuralError::Config(
                "hidden and batch_size must be positive".to_owned(),
            ));
        }
        self.optimizer.validate()
    }
}

/// The trainable parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCrfNet {
    pub oov: Tensor,
    pub bilstm: BiLstm,
    pub emission: Dense,
    pub crf: Crf,
}

/// Token inputs: a row of the frozen table, or the shared OOV vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenInput {
    Known(usize),
    Oov,
}

impl LstmCrfNet {
    pub fn new(dim: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        LstmCrfNet {
            oov: Tensor::zeros(&[dim]),
            bilstm: BiLstm::glorot(dim, hidden, rng),
            emission: Dense::glorot(2 * hidden, NUM_TAGS, rng),
            crf: Crf::zeros(),
        }
    }

    fn embed(&self, table: &Tensor, inputs: &[TokenInput]) -> Vec<Vec<f64>> {
        let dim = self.oov.len();
        inputs
            .iter()
            .map(|t| match *t {
                TokenInput::Known(row) => table.data[row * dim..(row + 1) * dim].to_vec(),
                TokenInput::Oov => self.oov.data.clone(),
            })
            .collect()
    }

    /// Emission scores for every token, with the intermediate values.
    pub fn emissions(
        &self,
        table: &Tensor,
        inputs: &[TokenInput],
    ) -> Result<(Vec<Emission>, Vec<Vec<f64>>, BiLstmCache)> {
        let xs = self.embed(table, inputs);
        let (hs, cache) = self.bilstm.run(&xs)?;
        let emissions = hs
            .iter()
            .map(|h| {
                let e = self.emission.forward_row(h);
                [e[0], e[1], e[2]]
            })
            .collect();
        Ok((emissions, hs, cache))
    }

    /// Negative log-likelihood of `tags`; adds `scale` times its gradient
    /// into `grads`.
    pub fn nll_backward(
        &self,
        table: &Tensor,
        inputs: &[TokenInput],
        tags: &[usize],
        scale: f64,
        grads: &mut LstmCrfNet,
    ) -> Result<f64> {
        let (emissions, hs, cache) = self.emissions(table, inputs)?;
        let mut crf_grads = Crf::zeros();
        let (nll, grad_e) = self.crf.nll_backward(&emissions, tags, &mut crf_grads)?;
        crf_grads.scale(scale);
        grads.crf.accumulate(&crf_grads);
        let grad_h: Vec<Vec<f64>> = hs
            .iter()
            .zip(&grad_e)
            .map(|(h, g)| {
                let g: Vec<f64> = g.iter().map(|v| v * scale).collect();
                self.emission.backward_row(h, &g, &mut grads.emission)
            })
            .collect();
        let grad_x = self.bilstm.run_backward(&cache, &grad_h, &mut grads.bilstm);
        for (input, gx) in inputs.iter().zip(&grad_x) {
            if *input == TokenInput::Oov {
                grads.oov.data.iter_mut().zip(gx).for_each(|(a, b)| *a += b);
            }
        }
        Ok(nll)
    }

    pub fn nll(&self, table: &Tensor, inputs: &[TokenInput], tags: &[usize]) -> Result<f64> {
        let (emissions, _, _) = self.emissions(table, inputs)?;
        Ok(-self.crf.log_likelihood(&emissions, tags)?)
    }
}

impl Params for LstmCrfNet {
    fn visit(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        f("oov", &self.oov);
        visit_child(&self.bilstm, "bilstm", f);
        visit_child(&self.emission, "emission", f);
        visit_child(&self.crf, "crf", f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        f("oov", &mut self.oov);
        visit_child_mut(&mut self.bilstm, "bilstm", f);
        visit_child_mut(&mut self.emission, "emission", f);
        visit_child_mut(&mut self.crf, "crf", f);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmCrfTagger {
    pub config: LstmCrfConfig,
    vocabulary: Vec<String>,
    index: HashMap<String, usize>,
    /// Frozen `[vocabulary, dim]` embedding rows.
    table: Tensor,
    pub net: LstmCrfNet,
}

impl LstmCrfTagger {
    /// Untrained model over the terms of `embeddings`.
    pub fn new(embeddings: &EmbeddingTable, config: LstmCrfConfig) -> Result<Self> {
        config.validate()?;
        let dim = embeddings.dim();
        if dim == 0 {
            return Err(NeuralError::Config("embedding dimension must be positive".to_owned()));
        }
        let vocabulary: Vec<String> = embeddings.sorted_terms().into_iter().map(str::to_owned).collect();
        let mut data = Vec::with_capacity(vocabulary.len() * dim);
        for term in &vocabulary {
            data.extend_from_slice(embeddings.get(term).expect("listed term"));
        }
        let table = Tensor {
            shape: vec![vocabulary.len(), dim],
            data,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let net = LstmCrfNet::new(dim, config.hidden, &mut rng);
        Ok(LstmCrfTagger::assemble(config, vocabulary, table, net))
    }

    fn assemble(config: LstmCrfConfig, vocabulary: Vec<String>, table: Tensor, net: LstmCrfNet) -> Self {
        let index = vocabulary
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        LstmCrfTagger {
            config,
            vocabulary,
            index,
            table,
            net,
        }
    }

    pub fn embedding_dim(&self) -> usize {
        self.net.oov.len()
    }

    pub fn inputs<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<TokenInput> {
        tokens
            .iter()
            .map(|t| match self.index.get(t.as_ref()) {
                Some(&i) => TokenInput::Known(i),
                None => TokenInput::Oov,
            })
            .collect()
    }

    pub fn table(&self) -> &Tensor {
        &self.table
    }

    /// Maximizes the CRF log-likelihood (minimizes mean sequence NLL) with
    /// Adam over shuffled mini-batches. Returns the mean NLL of each epoch.
    pub fn train(&mut self, data: &[IobSequence]) -> Result<Vec<f64>> {
        let examples: Vec<(Vec<TokenInput>, Vec<usize>)> = data
            .iter()
            .filter(|s| !s.is_empty())
            .map(|s| {
                (
                    self.inputs(s.tokens()),
                    s.tags().iter().map(|t| t.index()).collect(),
                )
            })
            .collect();
        if examples.is_empty() {
            return Err(NeuralError::EmptyDataset);
        }
        let config = self.config.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
        let mut adam = Adam::new(config.optimizer, self.net.param_count())?;
        let mut order: Vec<usize> = (0..examples.len()).collect();
        let mut history = Vec::with_capacity(config.epochs);
        for _ in 0..config.epochs {
            order.shuffle(&mut rng);
            let mut total = 0.0;
            for batch in order.chunks(config.batch_size) {
                let scale = 1.0 / batch.len() as f64;
                let mut grads = self.net.zeros_like();
                for &i in batch {
                    let (inputs, tags) = &examples[i];
                    total += self.net.nll_backward(&self.table, inputs, tags, scale, &mut grads)?;
                }
                adam.step(&mut self.net, &grads);
            }
            history.push(total / examples.len() as f64);
        }
        Ok(history)
    }

    /// Best tag path and its score.
    pub fn decode<S: AsRef<str>>(&self, tokens: &[S]) -> Result<(IobSequence, f64)> {
        let inputs = self.inputs(tokens);
        let (emissions, _, _) = self.net.emissions(&self.table, &inputs)?;
        let (path, score) = self.net.crf.viterbi(&emissions)?;
        let tags = path
            .into_iter()
            .map(|i| IobTag::from_index(i).ok_or(NeuralError::BadTag(i)))
            .collect::<Result<Vec<_>>>()?;
        let tokens = tokens.iter().map(|t| t.as_ref().to_owned()).collect();
        Ok((IobSequence::new(tokens, tags)?, score))
    }

    /// Product phrases over all queries, counted once per query that
    /// yields them. Queries are decoded in parallel.
    pub fn extract_candidates(&self, queries: &[Vec<String>]) -> Result<CandidateList> {
        let spans: Vec<BTreeSet<String>> = queries
            .par_iter()
            .filter(|q| !q.is_empty())
            .map(|q| Ok(self.decode(q)?.0.product_spans().into_iter().collect()))
            .collect::<Result<_>>()?;
        Ok(CandidateList::from_terms(spans.into_iter().flatten()))
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ckpt = Checkpoint::capture(CHECKPOINT_KIND, &self.config, &self.net);
        if !self.vocabulary.is_empty() {
            ckpt.params.insert("embeddings".to_owned(), self.table.clone());
        }
        ckpt.vocabulary = self.vocabulary.clone();
        ckpt
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        ckpt.expect_kind(CHECKPOINT_KIND)?;
        let mut ckpt = ckpt.clone();
        let config: LstmCrfConfig = ckpt.config()?;
        config.validate()?;
        let dim = ckpt
            .params
            .get("oov")
            .map(Tensor::len)
            .ok_or_else(|| NeuralError::checkpoint("params.oov", "missing"))?;
        let table = if ckpt.vocabulary.is_empty() {
            Tensor {
                shape: vec![0, dim],
                data: Vec::new(),
            }
        } else {
            let t = ckpt.take("embeddings")?;
            t.check_shape("embeddings", &[ckpt.vocabulary.len(), dim])?;
            t
        };
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut net = LstmCrfNet::new(dim, config.hidden, &mut rng);
        ckpt.restore(&mut net)?;
        let vocabulary = std::mem::take(&mut ckpt.vocabulary);
        Ok(LstmCrfTagger::assemble(config, vocabulary, table, net))
    }
}
