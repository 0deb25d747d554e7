//! Linear-chain CRF over the tags O=0, B=1, I=2.
//!
//! Transitions into I from O and from the start are forbidden. Stored
//! parameters stay finite (JSON has no infinities); the mask is applied
//! whenever scores are computed, and masked entries get zero gradient.

use rand::Rng;

use crate::activation::log_sum_exp;
use crate::error::{NeuralError, Result};
use crate::params::Params;
use crate::tensor::Tensor;

pub const NUM_TAGS: usize = 3;
pub const TAG_O: usize = 0;
pub const TAG_B: usize = 1;
pub const TAG_I: usize = 2;

/// Emission scores of one token, indexed by tag.
pub type Emission = [f64; NUM_TAGS];

pub fn transition_allowed(from: usize, to: usize) -> bool {
    !(from == TAG_O && to == TAG_I)
}

pub fn start_allowed(to: usize) -> bool {
    to != TAG_I
}

/// Whether every transition of `tags` (including from the start) is allowed.
pub fn is_valid_path(tags: &[usize]) -> bool {
    tags.first().is_none_or(|&t| start_allowed(t))
        && tags.windows(2).all(|w| transition_allowed(w[0], w[1]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Crf {
    /// `[from, to]`.
    pub transitions: Tensor,
    pub start: Tensor,
    pub end: Tensor,
}

impl Default for Crf {
    fn default() -> Self {
        Crf::zeros()
    }
}

impl Crf {
    pub fn zeros() -> Self {
        Crf {
            transitions: Tensor::zeros(&[NUM_TAGS, NUM_TAGS]),
            start: Tensor::zeros(&[NUM_TAGS]),
            end: Tensor::zeros(&[NUM_TAGS]),
        }
    }

    /// Every score uniform in `±scale`.
    pub fn random<R: Rng>(scale: f64, rng: &mut R) -> Self {
        let mut crf = Crf::zeros();
        crf.visit_mut(&mut |_, t| {
            t.data
                .iter_mut()
                .for_each(|x| *x = rng.random_range(-scale..=scale))
        });
        crf
    }

    /// Masked transition score.
    pub fn transition(&self, from: usize, to: usize) -> f64 {
        if transition_allowed(from, to) {
            self.transitions.data[from * NUM_TAGS + to]
        } else {
            f64::NEG_INFINITY
        }
    }

    /// Masked start score.
    pub fn start_score(&self, to: usize) -> f64 {
        if start_allowed(to) {
            self.start.data[to]
        } else {
            f64::NEG_INFINITY
        }
    }

    pub fn end_score(&self, from: usize) -> f64 {
        self.end.data[from]
    }

    /// Unnormalized score of one path; `-inf` for forbidden paths.
    pub fn path_score(&self, emissions: &[Emission], tags: &[usize]) -> Result<f64> {
        check_tags(emissions, tags)?;
        let mut score = self.start_score(tags[0]) + emissions[0][tags[0]];
        for t in 1..tags.len() {
            score += self.transition(tags[t - 1], tags[t]) + emissions[t][tags[t]];
        }
        Ok(score + self.end_score(tags[tags.len() - 1]))
    }

    /// `alpha[t][j]`: log-sum of all prefixes ending in tag `j` at `t`.
    fn forward_scores(&self, emissions: &[Emission]) -> Vec<Emission> {
        let mut alpha = Vec::with_capacity(emissions.len());
        alpha.push(std::array::from_fn(|j| self.start_score(j) + emissions[0][j]));
        for e in &emissions[1..] {
            let prev: &Emission = alpha.last().expect("non-empty");
            let next = std::array::from_fn(|j| {
                log_sum_exp((0..NUM_TAGS).map(|i| prev[i] + self.transition(i, j))) + e[j]
            });
            alpha.push(next);
        }
        alpha
    }

    /// `beta[t][i]`: log-sum of all suffixes after tag `i` at `t`.
    fn backward_scores(&self, emissions: &[Emission]) -> Vec<Emission> {
        let n = emissions.len();
        let mut beta = vec![[0.0; NUM_TAGS]; n];
        beta[n - 1] = std::array::from_fn(|i| self.end_score(i));
        for t in (0..n - 1).rev() {
            beta[t] = std::array::from_fn(|i| {
                log_sum_exp(
                    (0..NUM_TAGS)
                        .map(|j| self.transition(i, j) + emissions[t + 1][j] + beta[t + 1][j]),
                )
            });
        }
        beta
    }

    /// `log Σ_paths exp(score)` by the forward algorithm.
    pub fn log_partition(&self, emissions: &[Emission]) -> Result<f64> {
        if emissions.is_empty() {
            return Err(NeuralError::EmptySequence);
        }
        let alpha = self.forward_scores(emissions);
        let last = alpha.last().expect("non-empty");
        Ok(log_sum_exp((0..NUM_TAGS).map(|j| last[j] + self.end_score(j))))
    }

    /// `score(tags) - log_partition`.
    pub fn log_likelihood(&self, emissions: &[Emission], tags: &[usize]) -> Result<f64> {
        Ok(self.path_score(emissions, tags)? - self.log_partition(emissions)?)
    }

    /// Negative log-likelihood of a valid `tags` path. Adds its gradient
    /// with respect to the CRF scores into `grads` and returns it with the
    /// gradient with respect to the emissions.
    pub fn nll_backward(
        &self,
        emissions: &[Emission],
        tags: &[usize],
        grads: &mut Crf,
    ) -> Result<(f64, Vec<Emission>)> {
        check_tags(emissions, tags)?;
        if let Some(position) = first_invalid(tags) {
            return Err(NeuralError::InvalidPath { position });
        }
        let n = emissions.len();
        let alpha = self.forward_scores(emissions);
        let beta = self.backward_scores(emissions);
        let log_z = log_sum_exp((0..NUM_TAGS).map(|j| alpha[n - 1][j] + self.end_score(j)));
        let nll = log_z - self.path_score(emissions, tags)?;

        let mut grad_e = vec![[0.0; NUM_TAGS]; n];
        for t in 0..n {
            for j in 0..NUM_TAGS {
                grad_e[t][j] = (alpha[t][j] + beta[t][j] - log_z).exp();
            }
            grad_e[t][tags[t]] -= 1.0;
        }
        for j in 0..NUM_TAGS {
            if start_allowed(j) {
                grads.start.data[j] += grad_e[0][j];
            }
            grads.end.data[j] += (alpha[n - 1][j] + beta[n - 1][j] - log_z).exp();
        }
        grads.end.data[tags[n - 1]] -= 1.0;
        for t in 0..n - 1 {
            for i in 0..NUM_TAGS {
                for j in 0..NUM_TAGS {
                    if !transition_allowed(i, j) {
                        continue;
                    }
                    let pair = alpha[t][i] + self.transition(i, j) + emissions[t + 1][j]
                        + beta[t + 1][j]
                        - log_z;
                    grads.transitions.data[i * NUM_TAGS + j] += pair.exp();
                }
            }
            grads.transitions.data[tags[t] * NUM_TAGS + tags[t + 1]] -= 1.0;
        }
        Ok((nll, grad_e))
    }

    /// Highest-scoring path and its score. Ties go to the lower tag index,
    /// both for the last tag and at every backtrack step.
    pub fn viterbi(&self, emissions: &[Emission]) -> Result<(Vec<usize>, f64)> {
        if emissions.is_empty() {
            return Err(NeuralError::EmptySequence);
        }
        let n = emissions.len();
        let mut delta: Emission = std::array::from_fn(|j| self.start_score(j) + emissions[0][j]);
        let mut back: Vec<[usize; NUM_TAGS]> = Vec::with_capacity(n - 1);
        for e in &emissions[1..] {
            let mut next = [f64::NEG_INFINITY; NUM_TAGS];
            let mut ptr = [0; NUM_TAGS];
            for j in 0..NUM_TAGS {
                let (best_i, best) = argmax((0..NUM_TAGS).map(|i| delta[i] + self.transition(i, j)));
                next[j] = best + e[j];
                ptr[j] = best_i;
            }
            back.push(ptr);
            delta = next;
        }
        let (mut tag, score) = argmax((0..NUM_TAGS).map(|j| delta[j] + self.end_score(j)));
        let mut path = vec![tag; n];
        for t in (0..n - 1).rev() {
            tag = back[t][tag];
            path[t] = tag;
        }
        Ok((path, score))
    }
}

/// First index of the maximum; `-inf` entries never win over finite ones.
fn argmax(values: impl Iterator<Item = f64>) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

fn first_invalid(tags: &[usize]) -> Option<usize> {
    if !start_allowed(tags[0]) {
        return Some(0);
    }
    tags.windows(2)
        .position(|w| !transition_allowed(w[0], w[1]))
        .map(|p| p + 1)
}

fn check_tags(emissions: &[Emission], tags: &[usize]) -> Result<()> {
    if emissions.is_empty() {
        return Err(NeuralError::EmptySequence);
    }
    if emissions.len() != tags.len() {
        return Err(NeuralError::shape("crf", &[emissions.len()], &[tags.len()]));
    }
    match tags.iter().find(|&&t| t >= NUM_TAGS) {
        Some(&bad) => Err(NeuralError::BadTag(bad)),
        None => Ok(()),
    }
}

impl Params for Crf {
    fn visit(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        f("transitions", &self.transitions);
        f("start", &self.start);
        f("end", &self.end);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        f("transitions", &mut self.transitions);
        f("start", &mut self.start);
        f("end", &mut self.end);
    }
}
