use crate::error::Result;
use crate::numcore::{DenseMatrix, DenseVector, Rng};
use crate::params::{join, ParamSet, TensorVisitor};

/// Affine map `Wᵀx + b` with `W` stored `in × out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: DenseMatrix,
    pub b: DenseVector,
}

impl Dense {
    pub fn init(inputs: usize, outputs: usize, rng: &mut Rng) -> Result<Self> {
        let bound = 1.0 / (inputs as f64).sqrt();
        let w = (0..inputs * outputs).map(|_| rng.uniform_in(-bound, bound)).collect();
        let b: Vec<f64> = (0..outputs).map(|_| rng.uniform_in(-bound, bound)).collect();
        Ok(Self {
            w: DenseMatrix::new(inputs, outputs, w)?,
            b: b.into(),
        })
    }

    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            w: DenseMatrix::zeros(inputs, outputs),
            b: DenseVector::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.w.rows()
    }

    pub fn outputs(&self) -> usize {
        self.w.cols()
    }

    pub fn forward(&self, x: &[f64]) -> Result<DenseVector> {
        let mut y = self.w.tmatvec(x)?;
        y.add_assign(&self.b);
        Ok(y)
    }

    /// Accumulates parameter gradients into `grads` and returns `dL/dx`.
    pub fn backward(&self, x: &[f64], g_y: &[f64], grads: &mut Dense) -> Result<DenseVector> {
        grads.w.add_outer(x, g_y, 1.0);
        grads.b.add_assign(g_y);
        self.w.matvec(g_y)
    }
}

impl ParamSet for Dense {
    fn visit(&self, prefix: &str, f: &mut TensorVisitor<'_>) {
        f(&join(prefix, "w"), self.w.shape(), self.w.data());
        f(&join(prefix, "b"), (1, self.b.len()), &self.b);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [f64])) {
        f(&join(prefix, "w"), self.w.data_mut());
        f(&join(prefix, "b"), &mut self.b);
    }
}

impl ParamSet for DenseVector {
    fn visit(&self, prefix: &str, f: &mut TensorVisitor<'_>) {
        f(&join(prefix, "v"), (1, self.len()), self);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [f64])) {
        f(&join(prefix, "v"), self);
    }
}
