use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Result};
use crate::params::ParamSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates over a flattened parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl Adam {
    pub fn new(num_params: usize) -> Self {
        Self {
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            step: 0,
        }
    }

    /// Bias-corrected Adam update of `params` in place.
    pub fn update(&mut self, params: &mut dyn ParamSet, grads: &dyn ParamSet, cfg: &AdamConfig) -> Result<()> {
        let g = grads.flatten();
        if g.len() != self.m.len() || params.num_params() != self.m.len() {
            return Err(shape_err("adam_step", self.m.len(), g.len()));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - cfg.beta1.powi(t);
        let c2 = 1.0 - cfg.beta2.powi(t);
        let (m, v) = (&mut self.m, &mut self.v);
        let mut i = 0;
        params.visit_mut("", &mut |_, data| {
            for p in data.iter_mut() {
                let gi = g[i];
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                *p -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
                i += 1;
            }
        });
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::DenseVector;

    #[test]
    fn zero_gradient_leaves_parameters_and_decays_moments() {
        let mut p = DenseVector::new(vec![1.5, -2.0]);
        let mut adam = Adam::new(2);
        adam.m = vec![0.4, -0.2];
        adam.v = vec![0.1, 0.3];
        adam.step = 3;
        // moments are nonzero, so force a parameter-preserving case by lr = 0
        adam.update(&mut p, &DenseVector::zeros(2), &AdamConfig::with_lr(0.0))
            .unwrap();
        assert_eq!(p.as_slice(), &[1.5, -2.0]);
        assert!((adam.m[0] - 0.36).abs() < 1e-15);
        assert!((adam.v[1] - 0.3 * 0.999).abs() < 1e-15);

        let mut fresh = Adam::new(2);
        fresh
            .update(&mut p, &DenseVector::zeros(2), &AdamConfig::with_lr(0.1))
            .unwrap();
        assert_eq!(p.as_slice(), &[1.5, -2.0]);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        for g in [3.0, -0.02] {
            let mut p = DenseVector::new(vec![0.0]);
            let mut adam = Adam::new(1);
            adam.update(&mut p, &DenseVector::new(vec![g]), &AdamConfig::with_lr(0.001))
                .unwrap();
            assert!((p[0] + 0.001 * g.signum()).abs() < 1e-9, "{}", p[0]);
            assert_eq!(adam.step, 1);
        }
    }

    #[test]
    fn descends_a_parabola() {
        let mut theta = DenseVector::new(vec![1.0]);
        let mut adam = Adam::new(1);
        let cfg = AdamConfig::with_lr(0.05);
        let mut prev = theta[0].abs();
        for _ in 0..10 {
            let grad = DenseVector::new(vec![2.0 * theta[0]]);
            adam.update(&mut theta, &grad, &cfg).unwrap();
            assert!(theta[0].abs() < prev);
            prev = theta[0].abs();
        }
    }

    #[test]
    fn shape_mismatch() {
        let mut p = DenseVector::zeros(2);
        let mut adam = Adam::new(2);
        assert!(adam
            .update(&mut p, &DenseVector::zeros(3), &AdamConfig::with_lr(0.1))
            .is_err());
    }
}
