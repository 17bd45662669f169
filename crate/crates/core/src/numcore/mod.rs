//! Dense 64-bit linear-algebra kernels and the deterministic random source
//! everything else is built on.

mod matrix;
mod rng;
mod vector;

pub use matrix::{matmul, outer, DenseMatrix};
pub use rng::Rng;
pub use vector::{concat, hadamard, relu, softmax, softmax_vjp, DenseVector};

/// `n` draws from `N(mu, sigma^2)`.
pub fn rng_normal(rng: &mut Rng, n: usize, mu: f64, sigma: f64) -> crate::Result<DenseVector> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(crate::error::param_err(format!("sigma must be positive, got {sigma}")));
    }
    Ok(DenseVector::new(
        (0..n).map(|_| mu + sigma * rng.next_normal()).collect(),
    ))
}

/// `n` draws from the half-open interval `[lo, hi)`.
pub fn rng_uniform(rng: &mut Rng, n: usize, lo: f64, hi: f64) -> crate::Result<DenseVector> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(crate::error::param_err(format!(
            "uniform range requires lo < hi, got [{lo}, {hi})"
        )));
    }
    Ok(DenseVector::new((0..n).map(|_| rng.uniform_in(lo, hi)).collect()))
}
