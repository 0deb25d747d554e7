//! LSTM with a coupled input/forget gate and peephole connections:
//!
//! ```text
//! i_t = σ(W_xi x_t + W_hi h_{t-1} + w_ci ⊙ c_{t-1} + b_i)
//! c_t = (1 - i_t) ⊙ c_{t-1} + i_t ⊙ tanh(W_xc x_t + W_hc h_{t-1} + b_c)
//! o_t = σ(W_xo x_t + W_ho h_{t-1} + w_co ⊙ c_t + b_o)
//! h_t = o_t ⊙ tanh(c_t)
//! ```
//!
//! The peepholes `w_ci`, `w_co` are diagonal, stored as vectors.

use rand::Rng;

use crate::activation::sigmoid;
use crate::error::{NeuralError, Result};
use crate::params::{visit_child, visit_child_mut, Params};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct LstmCell {
    pub w_xi: Tensor,
    pub w_hi: Tensor,
    pub w_ci: Tensor,
    pub b_i: Tensor,
    pub w_xc: Tensor,
    pub w_hc: Tensor,
    pub b_c: Tensor,
    pub w_xo: Tensor,
    pub w_ho: Tensor,
    pub w_co: Tensor,
    pub b_o: Tensor,
}

/// Values of one step needed by its backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct CellCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub i: Vec<f64>,
    pub g: Vec<f64>,
    pub c: Vec<f64>,
    pub o: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

/// `y += W x` for `W: [out, in]`.
fn mat_vec_add(w: &Tensor, x: &[f64], y: &mut [f64]) {
    let n_in = x.len();
    for (o, yo) in y.iter_mut().enumerate() {
        let row = &w.data[o * n_in..(o + 1) * n_in];
        *yo += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `gx += Wᵀ g` and `gW += g xᵀ`.
fn mat_vec_backward(w: &Tensor, x: &[f64], g: &[f64], gw: &mut Tensor, gx: &mut [f64]) {
    let n_in = x.len();
    for (o, &go) in g.iter().enumerate() {
        if go == 0.0 {
            continue;
        }
        let row = &w.data[o * n_in..(o + 1) * n_in];
        let grow = &mut gw.data[o * n_in..(o + 1) * n_in];
        for k in 0..n_in {
            grow[k] += go * x[k];
            gx[k] += go * row[k];
        }
    }
}

impl LstmCell {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        let (x, h, v) = (&[hidden, input][..], &[hidden, hidden][..], &[hidden][..]);
        LstmCell {
            w_xi: Tensor::zeros(x),
            w_hi: Tensor::zeros(h),
            w_ci: Tensor::zeros(v),
            b_i: Tensor::zeros(v),
            w_xc: Tensor::zeros(x),
            w_hc: Tensor::zeros(h),
            b_c: Tensor::zeros(v),
            w_xo: Tensor::zeros(x),
            w_ho: Tensor::zeros(h),
            w_co: Tensor::zeros(v),
            b_o: Tensor::zeros(v),
        }
    }

    /// Glorot-uniform matrices and peepholes, zero biases.
    pub fn glorot<R: Rng>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let mut cell = LstmCell::zeros(input, hidden);
        for t in [&mut cell.w_xi, &mut cell.w_xc, &mut cell.w_xo] {
            *t = Tensor::glorot(&[hidden, input], input, hidden, rng);
        }
        for t in [&mut cell.w_hi, &mut cell.w_hc, &mut cell.w_ho] {
            *t = Tensor::glorot(&[hidden, hidden], hidden, hidden, rng);
        }
        for t in [&mut cell.w_ci, &mut cell.w_co] {
            *t = Tensor::glorot(&[hidden], hidden, hidden, rng);
        }
        cell
    }

    pub fn input_dim(&self) -> usize {
        self.w_xi.shape[1]
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_xi.shape[0]
    }

    pub fn step(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> Result<CellCache> {
        let (d, h) = (self.input_dim(), self.hidden_dim());
        if x.len() != d || h_prev.len() != h || c_prev.len() != h {
            return Err(NeuralError::shape(
                "lstm_cell",
                &[d, h, h],
                &[x.len(), h_prev.len(), c_prev.len()],
            ));
        }
        let mut zi = self.b_i.data.clone();
        mat_vec_add(&self.w_xi, x, &mut zi);
        mat_vec_add(&self.w_hi, h_prev, &mut zi);
        let i: Vec<f64> = (0..h)
            .map(|k| sigmoid(zi[k] + self.w_ci.data[k] * c_prev[k]))
            .collect();

        let mut zg = self.b_c.data.clone();
        mat_vec_add(&self.w_xc, x, &mut zg);
        mat_vec_add(&self.w_hc, h_prev, &mut zg);
        let g: Vec<f64> = zg.iter().map(|z| z.tanh()).collect();

        let c: Vec<f64> = (0..h)
            .map(|k| (1.0 - i[k]) * c_prev[k] + i[k] * g[k])
            .collect();

        let mut zo = self.b_o.data.clone();
        mat_vec_add(&self.w_xo, x, &mut zo);
        mat_vec_add(&self.w_ho, h_prev, &mut zo);
        let o: Vec<f64> = (0..h)
            .map(|k| sigmoid(zo[k] + self.w_co.data[k] * c[k]))
            .collect();

        let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
        let h_t = (0..h).map(|k| o[k] * tanh_c[k]).collect();
        Ok(CellCache {
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            c_prev: c_prev.to_vec(),
            i,
            g,
            c,
            o,
            tanh_c,
            h: h_t,
        })
    }

    /// Backward through one step given `dL/dh_t` and the gradient reaching
    /// `c_t` from later steps. Returns `(dL/dx, dL/dh_prev, dL/dc_prev)`.
    pub fn step_backward(
        &self,
        cache: &CellCache,
        grad_h: &[f64],
        grad_c_next: &[f64],
        grads: &mut LstmCell,
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let h = self.hidden_dim();
        let CellCache {
            x,
            h_prev,
            c_prev,
            i,
            g,
            c,
            o,
            tanh_c,
            ..
        } = cache;
        let mut dzi = vec![0.0; h];
        let mut dzg = vec![0.0; h];
        let mut dzo = vec![0.0; h];
        let mut grad_c_prev = vec![0.0; h];
        for k in 0..h {
            dzo[k] = grad_h[k] * tanh_c[k] * o[k] * (1.0 - o[k]);
            let dc = grad_c_next[k]
                + grad_h[k] * o[k] * (1.0 - tanh_c[k] * tanh_c[k])
                + dzo[k] * self.w_co.data[k];
            dzi[k] = dc * (g[k] - c_prev[k]) * i[k] * (1.0 - i[k]);
            dzg[k] = dc * i[k] * (1.0 - g[k] * g[k]);
            grad_c_prev[k] = dc * (1.0 - i[k]) + dzi[k] * self.w_ci.data[k];

            grads.w_ci.data[k] += dzi[k] * c_prev[k];
            grads.w_co.data[k] += dzo[k] * c[k];
            grads.b_i.data[k] += dzi[k];
            grads.b_c.data[k] += dzg[k];
            grads.b_o.data[k] += dzo[k];
        }
        let mut grad_x = vec![0.0; x.len()];
        let mut grad_h_prev = vec![0.0; h];
        mat_vec_backward(&self.w_xi, x, &dzi, &mut grads.w_xi, &mut grad_x);
        mat_vec_backward(&self.w_xc, x, &dzg, &mut grads.w_xc, &mut grad_x);
        mat_vec_backward(&self.w_xo, x, &dzo, &mut grads.w_xo, &mut grad_x);
        mat_vec_backward(&self.w_hi, h_prev, &dzi, &mut grads.w_hi, &mut grad_h_prev);
        mat_vec_backward(&self.w_hc, h_prev, &dzg, &mut grads.w_hc, &mut grad_h_prev);
        mat_vec_backward(&self.w_ho, h_prev, &dzo, &mut grads.w_ho, &mut grad_h_prev);
        (grad_x, grad_h_prev, grad_c_prev)
    }

    /// Runs the cell over `xs` from zero state.
    pub fn run(&self, xs: &[Vec<f64>]) -> Result<Vec<CellCache>> {
        let h = self.hidden_dim();
        let mut caches: Vec<CellCache> = Vec::with_capacity(xs.len());
        for x in xs {
            let cache = match caches.last() {
                Some(prev) => self.step(x, &prev.h, &prev.c)?,
                None => self.step(x, &vec![0.0; h], &vec![0.0; h])?,
            };
            caches.push(cache);
        }
        Ok(caches)
    }

    /// Backpropagation through time for [`LstmCell::run`], given `dL/dh_t`
    /// for every step. Returns `dL/dx_t`.
    pub fn run_backward(
        &self,
        caches: &[CellCache],
        grad_hs: &[Vec<f64>],
        grads: &mut LstmCell,
    ) -> Vec<Vec<f64>> {
        let h = self.hidden_dim();
        let mut grad_xs = vec![Vec::new(); caches.len()];
        let mut grad_h_next = vec![0.0; h];
        let mut grad_c_next = vec![0.0; h];
        for t in (0..caches.len()).rev() {
            let grad_h: Vec<f64> = (0..h).map(|k| grad_hs[t][k] + grad_h_next[k]).collect();
            let (gx, gh, gc) = self.step_backward(&caches[t], &grad_h, &grad_c_next, grads);
            grad_xs[t] = gx;
            grad_h_next = gh;
            grad_c_next = gc;
        }
        grad_xs
    }
}

impl Params for LstmCell {
    fn visit(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        f("w_xi", &self.w_xi);
        f("w_hi", &self.w_hi);
        f("w_ci", &self.w_ci);
        f("b_i", &self.b_i);
        f("w_xc", &self.w_xc);
        f("w_hc", &self.w_hc);
        f("b_c", &self.b_c);
        f("w_xo", &self.w_xo);
        f("w_ho", &self.w_ho);
        f("w_co", &self.w_co);
        f("b_o", &self.b_o);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        f("w_xi", &mut self.w_xi);
        f("w_hi", &mut self.w_hi);
        f("w_ci", &mut self.w_ci);
        f("b_i", &mut self.b_i);
        f("w_xc", &mut self.w_xc);
        f("w_hc", &mut self.w_hc);
        f("b_c", &mut self.b_c);
        f("w_xo", &mut self.w_xo);
        f("w_ho", &mut self.w_ho);
        f("w_co", &mut self.w_co);
        f("b_o", &mut self.b_o);
    }
}

/// Forward and reverse LSTMs whose outputs are concatenated per position.
#[derive(Debug, Clone, PartialEq)]
pub struct BiLstm {
    pub forward: LstmCell,
    pub backward: LstmCell,
}

/// Caches of both directions; `backward` is in reversed order.
#[derive(Debug, Clone, PartialEq)]
pub struct BiLstmCache {
    pub forward: Vec<CellCache>,
    pub backward: Vec<CellCache>,
}

impl BiLstm {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        BiLstm {
            forward: LstmCell::zeros(input, hidden),
            backward: LstmCell::zeros(input, hidden),
        }
    }

    pub fn glorot<R: Rng>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let forward = LstmCell::glorot(input, hidden, rng);
        let backward = LstmCell::glorot(input, hidden, rng);
        BiLstm { forward, backward }
    }

    pub fn output_dim(&self) -> usize {
        2 * self.forward.hidden_dim()
    }

    /// `[→h_t, ←h_t]` for every position.
    pub fn run(&self, xs: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, BiLstmCache)> {
        if xs.is_empty() {
            return Err(NeuralError::EmptySequence);
        }
        let fw = self.forward.run(xs)?;
        let reversed: Vec<Vec<f64>> = xs.iter().rev().cloned().collect();
        let bw = self.backward.run(&reversed)?;
        let n = xs.len();
        let outputs = (0..n)
            .map(|t| [fw[t].h.as_slice(), bw[n - 1 - t].h.as_slice()].concat())
            .collect();
        Ok((
            outputs,
            BiLstmCache {
                forward: fw,
                backward: bw,
            },
        ))
    }

    /// Returns `dL/dx_t` given `dL/d[→h_t, ←h_t]`.
    pub fn run_backward(
        &self,
        cache: &BiLstmCache,
        grad_outputs: &[Vec<f64>],
        grads: &mut BiLstm,
    ) -> Vec<Vec<f64>> {
        let h = self.forward.hidden_dim();
        let n = grad_outputs.len();
        let fw_grads: Vec<Vec<f64>> = grad_outputs.iter().map(|g| g[..h].to_vec()).collect();
        let bw_grads: Vec<Vec<f64>> = grad_outputs.iter().rev().map(|g| g[h..].to_vec()).collect();
        let mut gx = self
            .forward
            .run_backward(&cache.forward, &fw_grads, &mut grads.forward);
        let gx_bw = self
            .backward
            .run_backward(&cache.backward, &bw_grads, &mut grads.backward);
        for t in 0..n {
            for (a, b) in gx[t].iter_mut().zip(&gx_bw[n - 1 - t]) {
                *a += b;
            }
        }
        gx
    }
}

impl Params for BiLstm {
    fn visit(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        visit_child(&self.forward, "forward", f);
        visit_child(&self.backward, "backward", f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        visit_child_mut(&mut self.forward, "forward", f);
        visit_child_mut(&mut self.backward, "backward", f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_fixed_point() {
        let cell = LstmCell::zeros(2, 3);
        let s = cell.step(&[1.0, -1.0], &[0.0; 3], &[0.0; 3]).unwrap();
        assert_eq!(s.i, vec![0.5; 3]);
        assert_eq!(s.o, vec![0.5; 3]);
        assert_eq!(s.c, vec![0.0; 3]);
        assert_eq!(s.h, vec![0.0; 3]);
    }

    #[test]
    fn coupled_gate_halves_the_cell() {
        let cell = LstmCell::zeros(1, 2);
        let s = cell.step(&[0.7], &[0.0; 2], &[0.8, -2.0]).unwrap();
        assert_eq!(s.c, vec![0.4, -1.0]);
    }

    #[test]
    fn shape_and_empty_errors() {
        let cell = LstmCell::zeros(2, 3);
        assert!(cell.step(&[1.0], &[0.0; 3], &[0.0; 3]).is_err());
        assert!(matches!(
            BiLstm::zeros(2, 3).run(&[]),
            Err(NeuralError::EmptySequence)
        ));
    }
}
