//! Uniform access to learnable tensors, used by the optimizer, the
//! finite-difference checker and checkpointing.

use crate::error::{shape_err, Result};

/// Callback receiving a tensor's name, `(rows, cols)` shape and data.
pub type TensorVisitor<'a> = dyn FnMut(&str, (usize, usize), &[f64]) + 'a;

/// A collection of named, shaped parameter tensors visited in a fixed order.
pub trait ParamSet {
    /// Calls `f(name, (rows, cols), data)` for every tensor.
    fn visit(&self, prefix: &str, f: &mut TensorVisitor<'_>);

    /// Same order as [`ParamSet::visit`].
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [f64]));

    fn num_params(&self) -> usize {
        let mut n = 0;
        self.visit("", &mut |_, _, d| n += d.len());
        n
    }

    fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        self.visit("", &mut |_, _, d| out.extend_from_slice(d));
        out
    }

    fn load_flat(&mut self, flat: &[f64]) -> Result<()> {
        let n = self.num_params();
        if flat.len() != n {
            return Err(shape_err("load_flat", n, flat.len()));
        }
        let mut offset = 0;
        self.visit_mut("", &mut |_, d| {
            d.copy_from_slice(&flat[offset..offset + d.len()]);
            offset += d.len();
        });
        Ok(())
    }

    /// Names paired with element counts, in visit order.
    fn block_layout(&self) -> Vec<(String, usize)> {
        let mut out = Vec::new();
        self.visit("", &mut |name, _, d| out.push((name.to_string(), d.len())));
        out
    }
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}
