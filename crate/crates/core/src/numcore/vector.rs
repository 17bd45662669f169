use std::ops::{Deref, DerefMut};

use crate::error::{shape_err, Result};

/// Owned 64-bit real vector.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DenseVector(Vec<f64>);

impl DenseVector {
    pub fn new(data: Vec<f64>) -> Self {
        Self(data)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn filled(len: usize, value: f64) -> Self {
        Self(vec![value; len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.0.iter().zip(other).map(|(a, b)| a * b).sum()
    }

    pub fn add(&self, other: &DenseVector) -> Result<DenseVector> {
        if self.len() != other.len() {
            return Err(shape_err("add", self.len(), other.len()));
        }
        Ok(DenseVector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect()))
    }

    pub fn add_assign(&mut self, other: &[f64]) {
        debug_assert_eq!(self.len(), other.len());
        for (a, b) in self.0.iter_mut().zip(other) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.0.iter_mut().for_each(|a| *a *= factor);
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

impl Deref for DenseVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for DenseVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for DenseVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl From<&[f64]> for DenseVector {
    fn from(v: &[f64]) -> Self {
        Self(v.to_vec())
    }
}

/// Max-shifted softmax.
pub fn softmax(v: &[f64]) -> Result<DenseVector> {
    if v.is_empty() {
        return Err(shape_err("softmax", "len >= 1", 0));
    }
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|x| *x /= sum);
    Ok(DenseVector(out))
}

/// Vector-Jacobian product of softmax: given `y = softmax(x)` and upstream
/// `g = dL/dy`, returns `dL/dx = y * (g - <g, y>)`.
pub fn softmax_vjp(y: &[f64], g: &[f64]) -> DenseVector {
    debug_assert_eq!(y.len(), g.len());
    let inner: f64 = y.iter().zip(g).map(|(a, b)| a * b).sum();
    DenseVector(y.iter().zip(g).map(|(yi, gi)| yi * (gi - inner)).collect())
}

pub fn relu(v: &[f64]) -> DenseVector {
    DenseVector(v.iter().map(|&x| if x > 0.0 { x } else { 0.0 }).collect())
}

pub fn hadamard(u: &[f64], v: &[f64]) -> Result<DenseVector> {
    if u.len() != v.len() {
        return Err(shape_err("hadamard", u.len(), v.len()));
    }
    Ok(DenseVector(u.iter().zip(v).map(|(a, b)| a * b).collect()))
}

/// `u ⊕ v`, with `u` first.
pub fn concat(u: &[f64], v: &[f64]) -> Result<DenseVector> {
    if u.is_empty() || v.is_empty() {
        return Err(shape_err(
            "concat",
            "nonempty operands",
            format!("({}, {})", u.len(), v.len()),
        ));
    }
    let mut out = Vec::with_capacity(u.len() + v.len());
    out.extend_from_slice(u);
    out.extend_from_slice(v);
    Ok(DenseVector(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::Rng;

    fn random(rng: &mut Rng, n: usize, scale: f64) -> Vec<f64> {
        (0..n).map(|_| scale * rng.next_normal()).collect()
    }

    #[test]
    fn softmax_uniform_on_equal_inputs() {
        let s = softmax(&[0.0, 0.0, 0.0]).unwrap();
        for x in s.iter() {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_large_input_does_not_overflow() {
        let s = softmax(&[1000.0, 0.0]).unwrap();
        assert!(s.is_finite());
        assert!((s[0] - 1.0).abs() < 1e-300_f64.max(f64::EPSILON));
        assert!(s[1] < 1e-300);
    }

    #[test]
    fn softmax_matches_unshifted_oracle() {
        let x = [1.0, 2.0, 3.0];
        let e: Vec<f64> = x.iter().map(|v: &f64| v.exp()).collect();
        let z: f64 = e.iter().sum();
        let s = softmax(&x).unwrap();
        for (a, b) in s.iter().zip(&e) {
            assert!((a - b / z).abs() < 1e-14);
        }
    }

    #[test]
    fn softmax_rejects_empty() {
        assert!(softmax(&[]).is_err());
    }

    #[test]
    fn softmax_vjp_matches_finite_differences() {
        let mut rng = Rng::new(4);
        let x = random(&mut rng, 5, 1.0);
        let g = random(&mut rng, 5, 1.0);
        let y = softmax(&x).unwrap();
        let analytic = softmax_vjp(&y, &g);
        let h = 1e-6;
        for i in 0..x.len() {
            let f = |delta: f64| {
                let mut xp = x.clone();
                xp[i] += delta;
                softmax(&xp).unwrap().dot(&g)
            };
            let fd = (f(h) - f(-h)) / (2.0 * h);
            assert!((fd - analytic[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn relu_cases() {
        assert_eq!(relu(&[1.0, -1.0, 0.0]).as_slice(), &[1.0, 0.0, 0.0]);
        assert!(relu(&[-3.0, -0.5, -1e-12]).iter().all(|&x| x == 0.0));

        let mut rng = Rng::new(8);
        let v = random(&mut rng, 50, 2.0);
        let r = relu(&v);
        for (a, b) in v.iter().zip(r.iter()) {
            let expected = if *a > 0.0 { *a } else { 0.0 };
            assert_eq!(expected, *b);
        }
    }

    #[test]
    fn hadamard_cases() {
        assert_eq!(hadamard(&[1.0, 2.0], &[3.0, 4.0]).unwrap().as_slice(), &[3.0, 8.0]);
        let v = [0.5, -2.0, 7.0];
        assert_eq!(hadamard(&v, &[1.0; 3]).unwrap().as_slice(), &v);
        assert!(hadamard(&[1.0], &[1.0, 2.0]).is_err());

        let mut rng = Rng::new(9);
        let u = random(&mut rng, 20, 1.0);
        let w = random(&mut rng, 20, 1.0);
        let p = hadamard(&u, &w).unwrap();
        for i in 0..20 {
            assert_eq!(p[i], u[i] * w[i]);
        }
    }

    #[test]
    fn concat_cases() {
        assert_eq!(concat(&[2.0, 3.0], &[5.0]).unwrap().as_slice(), &[2.0, 3.0, 5.0]);
        let u = [1.0, 2.0];
        let v = [3.0, 4.0];
        assert_ne!(concat(&u, &v).unwrap(), concat(&v, &u).unwrap());
        assert!(concat(&[], &[1.0]).is_err());
        assert!(concat(&[1.0], &[]).is_err());
        let big = concat(&vec![0.0; 2048], &vec![0.0; 4800]).unwrap();
        assert_eq!(big.len(), 6848);
    }
}
