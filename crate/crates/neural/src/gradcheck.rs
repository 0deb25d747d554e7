//! Central finite differences against analytic gradients.

use crate::params::Params;

/// Step used by the checks in this crate.
pub const DEFAULT_STEP: f64 = 1e-5;

/// `|a - n| / max(1e-8, |a| + |n|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// `(f(x + h e_i) - f(x - h e_i)) / 2h` for every coordinate.
pub fn numeric_gradient<F: FnMut(&[f64]) -> f64>(x: &[f64], h: f64, mut f: F) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Largest relative error between `analytic` and the finite-difference
/// gradient of `f` at `x`.
pub fn gradient_check<F: FnMut(&[f64]) -> f64>(x: &[f64], analytic: &[f64], h: f64, f: F) -> f64 {
    assert_eq!(x.len(), analytic.len());
    numeric_gradient(x, h, f)
        .into_iter()
        .zip(analytic)
        .map(|(n, a)| relative_error(*a, n))
        .fold(0.0, f64::max)
}

/// [`gradient_check`] over every parameter of `model`, where `loss`
/// evaluates a model and `grads` holds its analytic gradient.
pub fn check_params<P, F>(model: &P, grads: &P, h: f64, mut loss: F) -> f64
where
    P: Params + Clone,
    F: FnMut(&P) -> f64,
{
    let mut probe = model.clone();
    gradient_check(&model.flatten(), &grads.flatten(), h, |flat| {
        probe.assign(flat);
        loss(&probe)
    })
}
