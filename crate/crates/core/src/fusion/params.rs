use crate::error::{param_err, Result};
use crate::numcore::{DenseMatrix, DenseVector, Rng};
use crate::params::{join, ParamSet, TensorVisitor};

/// Learnable weights of one memory fusion layer over `d`-dimensional inputs.
///
/// Linear maps are stored input-major: `W_r` is `d×d` and applied as
/// `W_rᵀ·x + b_r`; `W_c` is `2d×d` and applied to `query ⊕ m_r`.
#[derive(Debug, Clone, PartialEq)]
pub struct MbafParams {
    pub w_r: DenseMatrix,
    pub b_r: DenseVector,
    pub w_c: DenseMatrix,
    pub b_c: DenseVector,
    /// Elementwise scale applied to the composition before the ReLU.
    pub w_scale: DenseVector,
}

/// Cotangents of [`MbafParams`], field for field.
#[derive(Debug, Clone, PartialEq)]
pub struct MbafGrads {
    pub w_r: DenseMatrix,
    pub b_r: DenseVector,
    pub w_c: DenseMatrix,
    pub b_c: DenseVector,
    pub w_scale: DenseVector,
}

fn uniform_fill(rng: &mut Rng, n: usize, fan_in: usize) -> Vec<f64> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    (0..n).map(|_| rng.uniform_in(-bound, bound)).collect()
}

impl MbafParams {
    /// Uniform initialisation in `±1/sqrt(fan_in)`; the elementwise scale
    /// has fan-in 1.
    pub fn init(dim: usize, rng: &mut Rng) -> Result<Self> {
        if dim == 0 {
            return Err(param_err("fusion dimension must be >= 1"));
        }
        let d = dim;
        Ok(Self {
            w_r: DenseMatrix::new(d, d, uniform_fill(rng, d * d, d))?,
            b_r: uniform_fill(rng, d, d).into(),
            w_c: DenseMatrix::new(2 * d, d, uniform_fill(rng, 2 * d * d, 2 * d))?,
            b_c: uniform_fill(rng, d, 2 * d).into(),
            w_scale: uniform_fill(rng, d, 1).into(),
        })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            w_r: DenseMatrix::zeros(dim, dim),
            b_r: DenseVector::zeros(dim),
            w_c: DenseMatrix::zeros(2 * dim, dim),
            b_c: DenseVector::zeros(dim),
            w_scale: DenseVector::zeros(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.b_r.len()
    }
}

impl MbafGrads {
    pub fn zeros(dim: usize) -> Self {
        let p = MbafParams::zeros(dim);
        Self {
            w_r: p.w_r,
            b_r: p.b_r,
            w_c: p.w_c,
            b_c: p.b_c,
            w_scale: p.w_scale,
        }
    }

    pub fn dim(&self) -> usize {
        self.b_r.len()
    }
}

macro_rules! impl_param_set {
    ($ty:ty) => {
        impl ParamSet for $ty {
            fn visit(&self, prefix: &str, f: &mut TensorVisitor<'_>) {
                f(&join(prefix, "w_r"), self.w_r.shape(), self.w_r.data());
                f(&join(prefix, "b_r"), (1, self.b_r.len()), &self.b_r);
                f(&join(prefix, "w_c"), self.w_c.shape(), self.w_c.data());
                f(&join(prefix, "b_c"), (1, self.b_c.len()), &self.b_c);
                f(&join(prefix, "w_scale"), (1, self.w_scale.len()), &self.w_scale);
            }

            fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [f64])) {
                f(&join(prefix, "w_r"), self.w_r.data_mut());
                f(&join(prefix, "b_r"), &mut self.b_r);
                f(&join(prefix, "w_c"), self.w_c.data_mut());
                f(&join(prefix, "b_c"), &mut self.b_c);
                f(&join(prefix, "w_scale"), &mut self.w_scale);
            }
        }
    };
}

impl_param_set!(MbafParams);
impl_param_set!(MbafGrads);

/// Closed-form parameter estimate `3(s1+s2)^2 + (q+2)(s1+s2)` with `q` the
/// batch size.
///
/// It exceeds [`param_count_actual`] by `(q - 1)·d`, a surplus no weight in
/// the layer accounts for.
pub fn param_count_paper(s1: u64, s2: u64, q: u64) -> u64 {
    let d = s1 + s2;
    3 * d * d + (q + 2) * d
}

/// Learnable scalars actually held by [`MbafParams`]: `3d^2 + 3d`. The
/// memory buffer is state, not a parameter.
pub fn param_count_actual(params: &MbafParams) -> u64 {
    params.num_params() as u64
}
