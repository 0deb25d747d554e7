//! Uniform access to the trainable tensors of a layer or model.
//!
//! Gradients are stored in a value of the same type as the model, so the
//! optimizer and the gradient checker can walk both in lockstep.

use crate::tensor::Tensor;

pub trait Params {
    /// Visits every parameter tensor in a fixed order with its dotted name.
    fn visit(&self, f: &mut dyn FnMut(&str, &Tensor));

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor));

    fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_, t| n += t.len());
        n
    }

    /// A copy with every parameter zeroed, used as a gradient accumulator.
    fn zeros_like(&self) -> Self
    where
        Self: Clone,
    {
        let mut z = self.clone();
        z.visit_mut(&mut |_, t| t.data.fill(0.0));
        z
    }

    fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.visit(&mut |_, t| out.extend_from_slice(&t.data));
        out
    }

    /// Overwrites the parameters from a vector laid out as [`Params::flatten`].
    fn assign(&mut self, flat: &[f64]) {
        let mut offset = 0;
        self.visit_mut(&mut |_, t| {
            let n = t.len();
            t.data.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        });
        assert_eq!(offset, flat.len(), "flat parameter vector has the wrong length");
    }

    /// `self += other`, elementwise.
    fn accumulate(&mut self, other: &Self)
    where
        Self: Sized,
    {
        let flat = other.flatten();
        let mut offset = 0;
        self.visit_mut(&mut |_, t| {
            for (a, b) in t.data.iter_mut().zip(&flat[offset..]) {
                *a += b;
            }
            offset += t.len();
        });
    }

    fn scale(&mut self, factor: f64) {
        self.visit_mut(&mut |_, t| t.data.iter_mut().for_each(|x| *x *= factor));
    }
}

/// Visits a nested parameter set under `prefix.`.
pub fn visit_child<P: Params + ?Sized>(child: &P, prefix: &str, f: &mut dyn FnMut(&str, &Tensor)) {
    child.visit(&mut |name, t| f(&format!("{prefix}.{name}"), t));
}

pub fn visit_child_mut<P: Params + ?Sized>(
    child: &mut P,
    prefix: &str,
    f: &mut dyn FnMut(&str, &mut Tensor),
) {
    child.visit_mut(&mut |name, t| f(&format!("{prefix}.{name}"), t));
}
