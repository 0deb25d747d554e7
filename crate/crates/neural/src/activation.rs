//! Elementwise activations and the per-token loss, each with its
//! derivative.

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

pub fn relu_in_place(xs: &mut [f64]) {
    xs.iter_mut().for_each(|x| *x = relu(*x));
}

/// Gradient through ReLU given its output.
pub fn relu_backward(output: &[f64], grad: &[f64]) -> Vec<f64> {
    output
        .iter()
        .zip(grad)
        .map(|(y, g)| if *y > 0.0 { *g } else { 0.0 })
        .collect()
}

/// Gradient through sigmoid given its output.
pub fn sigmoid_backward(output: f64, grad: f64) -> f64 {
    grad * output * (1.0 - output)
}

/// Gradient through tanh given its output.
pub fn tanh_backward(output: f64, grad: f64) -> f64 {
    grad * (1.0 - output * output)
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Vector-Jacobian product of softmax given its output.
pub fn softmax_backward(output: &[f64], grad: &[f64]) -> Vec<f64> {
    let dot: f64 = output.iter().zip(grad).map(|(y, g)| y * g).sum();
    output.iter().zip(grad).map(|(y, g)| y * (g - dot)).collect()
}

/// `log Σ exp(x)`, stable; `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(xs: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.into_iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Binary cross-entropy of `sigmoid(logit)` against `target`, computed from
/// the logit. Returns the loss and its derivative in the logit.
pub fn bce_with_logit(logit: f64, target: f64) -> (f64, f64) {
    let loss = logit.max(0.0) - logit * target + (-logit.abs()).exp().ln_1p();
    (loss, sigmoid(logit) - target)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_points() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(relu(-3.0), 0.0);
        assert_eq!(relu(2.5), 2.5);
        assert_eq!(softmax(&[1.0, 1.0, 1.0, 1.0]), vec![0.25; 4]);
        assert!((log_sum_exp([0.0, 0.0]) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(log_sum_exp([f64::NEG_INFINITY]), f64::NEG_INFINITY);
    }

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
    }

    #[test]
    fn bce_matches_direct_formula() {
        for &(z, t) in &[(0.3, 1.0), (-2.0, 0.0), (4.0, 0.0)] {
            let p = sigmoid(z);
            let direct = -(t * p.ln() + (1.0 - t) * (1.0 - p).ln());
            let (loss, grad) = bce_with_logit(z, t);
            assert!((loss - direct).abs() < 1e-12);
            assert!((grad - (p - t)).abs() < 1e-15);
        }
    }
}
