//! Synthetic bimodal classification streams with a hidden regime.
//!
//! A latent regime switches every `regime_period` steps to a different,
//! uniformly chosen regime. Each step draws a signal index uniformly from
//! `0..classes` and is labelled `(regime + signal) mod classes`.
//!
//! * mode 1 is the regime prototype plus `N(0, σ²)` noise, except that with
//!   probability `occlusion_prob` it is replaced by `N(0, 1 + σ²)` noise,
//!   which has the same per-coordinate scale but carries no information;
//! * mode 2 is the signal prototype plus `N(0, σ²)` noise.
//!
//! Prototypes are drawn once from `N(0, 1)`. On an occluded step the label
//! can only be recovered by remembering the regime from earlier steps, so
//! the stream order matters and is preserved everywhere.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{param_err, Result};
use crate::numcore::{DenseVector, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskConfig {
    pub s1: usize,
    pub s2: usize,
    pub classes: usize,
    pub regimes: usize,
    pub regime_period: usize,
    pub occlusion_prob: f64,
    pub noise_sigma: f64,
    pub length: usize,
    pub seed: u64,
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self {
            s1: 8,
            s2: 8,
            classes: 3,
            regimes: 3,
            regime_period: 8,
            occlusion_prob: 0.5,
            noise_sigma: 0.5,
            length: 10_000,
            seed: 0,
        }
    }
}

impl TaskConfig {
    pub fn validate(&self) -> Result<()> {
        if self.s1 == 0 || self.s2 == 0 {
            return Err(param_err("feature dims must be >= 1"));
        }
        if self.classes < 2 {
            return Err(param_err("need at least 2 classes"));
        }
        if self.regimes == 0 {
            return Err(param_err("need at least 1 regime"));
        }
        if self.regime_period == 0 {
            return Err(param_err("regime_period must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.occlusion_prob) {
            return Err(param_err(format!(
                "occlusion_prob must be in [0, 1), got {}",
                self.occlusion_prob
            )));
        }
        if !(self.noise_sigma > 0.0) || !self.noise_sigma.is_finite() {
            return Err(param_err(format!(
                "noise_sigma must be positive, got {}",
                self.noise_sigma
            )));
        }
        if self.length == 0 {
            return Err(param_err("length must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub m1: DenseVector,
    pub m2: DenseVector,
    pub label: usize,
    /// Position in the stream.
    pub t: usize,
    pub regime: usize,
    pub signal: usize,
    pub occluded: bool,
}

fn prototypes(rng: &mut Rng, count: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| (0..dim).map(|_| rng.next_normal()).collect())
        .collect()
}

fn noisy(rng: &mut Rng, base: &[f64], sigma: f64) -> DenseVector {
    base.iter()
        .map(|b| b + sigma * rng.next_normal())
        .collect::<Vec<_>>()
        .into()
}

/// Generates the ordered stream; a pure function of `config`.
pub fn gen_dataset(config: &TaskConfig) -> Result<Vec<Sample>> {
    config.validate()?;
    gen_unchecked(config)
}

/// Same as [`gen_dataset`] but allows `occlusion_prob == 1`, for analysis.
pub fn gen_dataset_fully_occludable(config: &TaskConfig) -> Result<Vec<Sample>> {
    let mut c = config.clone();
    let p = c.occlusion_prob;
    if !(0.0..=1.0).contains(&p) {
        return Err(param_err(format!("occlusion_prob must be in [0, 1], got {p}")));
    }
    c.occlusion_prob = 0.0;
    c.validate()?;
    gen_unchecked(config)
}

fn gen_unchecked(config: &TaskConfig) -> Result<Vec<Sample>> {
    let mut root = Rng::new(config.seed);
    let mut proto_rng = root.fork(1);
    let mut rng = root.fork(2);
    let regime_protos = prototypes(&mut proto_rng, config.regimes, config.s1);
    let signal_protos = prototypes(&mut proto_rng, config.classes, config.s2);
    let sigma = config.noise_sigma;
    let occluded_sigma = (1.0 + sigma * sigma).sqrt();

    let mut regime = rng.below(config.regimes);
    let mut out = Vec::with_capacity(config.length);
    for t in 0..config.length {
        if t > 0 && t % config.regime_period == 0 && config.regimes > 1 {
            let r = rng.below(config.regimes - 1);
            regime = if r >= regime { r + 1 } else { r };
        }
        let signal = rng.below(config.classes);
        let label = (regime + signal) % config.classes;
        let occluded = rng.next_f64() < config.occlusion_prob;
        let m1 = if occluded {
            noisy(&mut rng, &vec![0.0; config.s1], occluded_sigma)
        } else {
            noisy(&mut rng, &regime_protos[regime], sigma)
        };
        let m2 = noisy(&mut rng, &signal_protos[signal], sigma);
        out.push(Sample {
            m1,
            m2,
            label,
            t,
            regime,
            signal,
            occluded,
        });
    }
    Ok(out)
}

/// Contiguous train/validation/test split preserving stream order.
///
/// Sizes are `round(n·train_frac)`, `round(n·val_frac)` and the remainder.
pub fn split<T: Clone>(dataset: &[T], train_frac: f64, val_frac: f64) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    if !(train_frac > 0.0) || !(val_frac > 0.0) || train_frac + val_frac >= 1.0 {
        return Err(param_err(format!(
            "split fractions must be positive with sum < 1, got ({train_frac}, {val_frac})"
        )));
    }
    let n = dataset.len();
    let n_train = (n as f64 * train_frac).round() as usize;
    let n_val = (n as f64 * val_frac).round() as usize;
    if n_train == 0 || n_val == 0 || n_train + n_val >= n {
        return Err(param_err(format!("split of {n} samples leaves an empty part")));
    }
    Ok((
        dataset[..n_train].to_vec(),
        dataset[n_train..n_train + n_val].to_vec(),
        dataset[n_train + n_val..].to_vec(),
    ))
}

/// One row per sample: `t,label,m1_0..,m2_0..`.
pub fn to_csv(samples: &[Sample]) -> String {
    let mut out = String::from("t,label");
    if let Some(first) = samples.first() {
        for i in 0..first.m1.len() {
            let _ = write!(out, ",m1_{i}");
        }
        for i in 0..first.m2.len() {
            let _ = write!(out, ",m2_{i}");
        }
    }
    out.push('\n');
    for s in samples {
        let _ = write!(out, "{},{}", s.t, s.label);
        for v in s.m1.iter().chain(s.m2.iter()) {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}
