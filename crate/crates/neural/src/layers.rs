//! Same-padded 1-D convolution and dense layers with hand-written
//! backward passes.

use rand::Rng;

use crate::error::{NeuralError, Result};
use crate::params::Params;
use crate::tensor::Tensor;

/// Affine map `y = W x + b` with `W: [out, in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Dense {
    pub fn zeros(input: usize, output: usize) -> Self {
        Dense {
            weight: Tensor::zeros(&[output, input]),
            bias: Tensor::zeros(&[output]),
        }
    }

    pub fn glorot<R: Rng>(input: usize, output: usize, rng: &mut R) -> Self {
        Dense {
            weight: Tensor::glorot(&[output, input], input, output, rng),
            bias: Tensor::zeros(&[output]),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.shape[1]
    }

    pub fn output_dim(&self) -> usize {
        self.weight.shape[0]
    }

    pub fn forward_row(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.input_dim());
        self.weight
            .rows()
            .zip(&self.bias.data)
            .map(|(w, b)| b + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    }

    /// Accumulates parameter gradients into `grads` and returns `dL/dx`.
    pub fn backward_row(&self, x: &[f64], grad_out: &[f64], grads: &mut Dense) -> Vec<f64> {
        let n_in = self.input_dim();
        let mut grad_x = vec![0.0; n_in];
        for (o, &g) in grad_out.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            grads.bias.data[o] += g;
            let w = &self.weight.data[o * n_in..(o + 1) * n_in];
            let gw = &mut grads.weight.data[o * n_in..(o + 1) * n_in];
            for i in 0..n_in {
                gw[i] += g * x[i];
                grad_x[i] += g * w[i];
            }
        }
        grad_x
    }

    /// Applies the layer to every row of a `[len, in]` tensor.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        check_sequence("dense_forward", x, self.input_dim())?;
        let rows: Vec<Vec<f64>> = x.rows().map(|r| self.forward_row(r)).collect();
        Tensor::from_rows(&rows)
    }
}

impl Params for Dense {
    fn visit(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        f("weight", &self.weight);
        f("bias", &self.bias);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        f("weight", &mut self.weight);
        f("bias", &mut self.bias);
    }
}

fn check_sequence(op: &'static str, x: &Tensor, channels: usize) -> Result<()> {
    if x.shape.len() != 2 || x.shape[1] != channels {
        return Err(NeuralError::shape(op, &[x.shape.first().copied().unwrap_or(0), channels], &x.shape));
    }
    Ok(())
}

/// Cross-correlation over time with zero same-padding. Weights are
/// `[out, in, width]`; the width is odd so the padding is symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Conv1d {
    pub fn zeros(input: usize, output: usize, width: usize) -> Result<Self> {
        check_width(width)?;
        Ok(Conv1d {
            weight: Tensor::zeros(&[output, input, width]),
            bias: Tensor::zeros(&[output]),
        })
    }

    pub fn glorot<R: Rng>(input: usize, output: usize, width: usize, rng: &mut R) -> Result<Self> {
        check_width(width)?;
        Ok(Conv1d {
            weight: Tensor::glorot(&[output, input, width], input * width, output * width, rng),
            bias: Tensor::zeros(&[output]),
        })
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape[1]
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape[0]
    }

    pub fn width(&self) -> usize {
        self.weight.shape[2]
    }

    /// `x` is `[len][in]`; returns `[len][out]`.
    pub fn forward_rows(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let (n_out, n_in, width) = (self.out_channels(), self.in_channels(), self.width());
        let half = width / 2;
        let len = x.len();
        let w = &self.weight.data;
        (0..len)
            .map(|t| {
                let mut y = self.bias.data.clone();
                for k in 0..width {
                    let Some(s) = (t + k).checked_sub(half).filter(|s| *s < len) else {
                        continue;
                    };
                    let xs = &x[s];
                    for (o, yo) in y.iter_mut().enumerate() {
                        let base = o * n_in * width + k;
                        let mut acc = 0.0;
                        for i in 0..n_in {
                            acc += w[base + i * width] * xs[i];
                        }
                        *yo += acc;
                    }
                }
                debug_assert_eq!(y.len(), n_out);
                y
            })
            .collect()
    }

    /// Accumulates parameter gradients into `grads` and returns `dL/dx`.
    pub fn backward_rows(
        &self,
        x: &[Vec<f64>],
        grad_out: &[Vec<f64>],
        grads: &mut Conv1d,
    ) -> Vec<Vec<f64>> {
        let (n_in, width) = (self.in_channels(), self.width());
        let half = width / 2;
        let len = x.len();
        let w = &self.weight.data;
        let mut grad_x = vec![vec![0.0; n_in]; len];
        for t in 0..len {
            for (o, &g) in grad_out[t].iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                grads.bias.data[o] += g;
                for k in 0..width {
                    let Some(s) = (t + k).checked_sub(half).filter(|s| *s < len) else {
                        continue;
                    };
                    let base = o * n_in * width + k;
                    let xs = &x[s];
                    let gx = &mut grad_x[s];
                    for i in 0..n_in {
                        grads.weight.data[base + i * width] += g * xs[i];
                        gx[i] += g * w[base + i * width];
                    }
                }
            }
        }
        grad_x
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        check_sequence("conv1d_forward", x, self.in_channels())?;
        Tensor::from_rows(&self.forward_rows(&x.to_rows()))
    }

    pub fn backward(&self, x: &Tensor, grad_out: &Tensor, grads: &mut Conv1d) -> Result<Tensor> {
        check_sequence("conv1d_backward", x, self.in_channels())?;
        grad_out.check_shape("conv1d_backward", &[x.shape[0], self.out_channels()])?;
        Tensor::from_rows(&self.backward_rows(&x.to_rows(), &grad_out.to_rows(), grads))
    }
}

fn check_width(width: usize) -> Result<()> {
    if width % 2 == 1 {
        Ok(())
    } else {
        Err(NeuralError::Config(format!("filter width {width} must be odd")))
    }
}

impl Params for Conv1d {
    fn visit(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        f("weight", &self.weight);
        f("bias", &self.bias);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        f("weight", &mut self.weight);
        f("bias", &mut self.bias);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column(values: &[f64]) -> Tensor {
        Tensor::new(vec![values.len(), 1], values.to_vec()).unwrap()
    }

    #[test]
    fn width_one_identity() {
        let mut c = Conv1d::zeros(2, 2, 1).unwrap();
        c.weight.data = vec![1.0, 0.0, 0.0, 1.0];
        let x = Tensor::new(vec![3, 2], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(c.forward(&x).unwrap(), x);
    }

    #[test]
    fn zero_weights_give_bias() {
        let mut c = Conv1d::zeros(1, 2, 3).unwrap();
        c.bias.data = vec![0.5, -1.0];
        let y = c.forward(&column(&[1.0, 2.0, 3.0])).unwrap();
        assert_eq!(y.data, vec![0.5, -1.0, 0.5, -1.0, 0.5, -1.0]);
    }

    #[test]
    fn averaging_kernel_with_zero_padding() {
        let mut c = Conv1d::zeros(1, 1, 3).unwrap();
        c.weight.data = vec![1.0 / 3.0; 3];
        let y = c.forward(&column(&[1.0, 2.0, 3.0])).unwrap();
        let expected = [1.0, 2.0, 5.0 / 3.0];
        for (a, b) in y.data.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn even_width_and_shape_mismatch_rejected() {
        assert!(Conv1d::zeros(1, 1, 4).is_err());
        let c = Conv1d::zeros(2, 1, 3).unwrap();
        assert!(c.forward(&column(&[1.0])).is_err());
        assert!(Dense::zeros(3, 1).forward(&column(&[1.0])).is_err());
    }

    #[test]
    fn identity_conv_gradient_is_ones() {
        let mut c = Conv1d::zeros(1, 1, 1).unwrap();
        c.weight.data = vec![1.0];
        let x = column(&[0.3, -2.0, 5.0]);
        let mut g = c.zeros_like();
        let gx = c.backward(&x, &column(&[1.0, 1.0, 1.0]), &mut g).unwrap();
        assert_eq!(gx.data, vec![1.0; 3]);
    }

    #[test]
    fn dense_affine() {
        let mut d = Dense::zeros(2, 1);
        d.weight.data = vec![2.0, -1.0];
        d.bias.data = vec![0.5];
        assert_eq!(d.forward_row(&[1.0, 3.0]), vec![-0.5]);
    }
}
