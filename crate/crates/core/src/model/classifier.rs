use serde::{Deserialize, Serialize};

use crate::error::{param_err, shape_err, MbafError, Result};
use crate::fusion::{fusion_backward, fusion_forward, FusionParams, FusionVariant, MemoryState};
use crate::numcore::{relu, softmax, DenseVector, Rng};
use crate::params::{join, ParamSet, TensorVisitor};

use super::dense::Dense;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierConfig {
    /// Width of the per-mode dense+ReLU encoder; 0 passes features through.
    #[serde(default)]
    pub encoder_hidden: usize,
    /// Width of the head's hidden layer; 0 makes the head a single linear map.
    pub head_hidden: usize,
    pub classes: usize,
    #[serde(default)]
    pub dropout_rate: f64,
    pub fusion: FusionVariant,
    pub slots: usize,
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Draw a fresh memory at the start of every epoch instead of keeping it.
    #[serde(default)]
    pub reinit_memory_each_epoch: bool,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            encoder_hidden: 0,
            head_hidden: 32,
            classes: 3,
            dropout_rate: 0.0,
            fusion: FusionVariant::NaiveAttention,
            slots: 30,
            lr: 0.001,
            batch: 32,
            epochs: 10,
            seed: 0,
            reinit_memory_each_epoch: false,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        self.fusion.validate()?;
        if self.classes < 2 {
            return Err(param_err("classifier needs at least 2 classes"));
        }
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return Err(param_err(format!(
                "learning rate must be finite and >= 0, got {}",
                self.lr
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(param_err(format!(
                "dropout_rate must be in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        if self.batch == 0 {
            return Err(param_err("batch must be >= 1"));
        }
        if self.fusion.uses_memory() && self.slots == 0 {
            return Err(param_err("slots must be >= 1"));
        }
        Ok(())
    }
}

/// Every learnable tensor of the classifier. Also used for its gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierParams {
    pub enc1: Option<Dense>,
    pub enc2: Option<Dense>,
    pub fusion: FusionParams,
    pub hidden: Option<Dense>,
    pub out: Dense,
}

impl ClassifierParams {
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.visit_mut("", &mut |_, d| d.iter_mut().for_each(|x| *x = 0.0));
        z
    }
}

impl ParamSet for ClassifierParams {
    fn visit(&self, prefix: &str, f: &mut TensorVisitor<'_>) {
        if let Some(e) = &self.enc1 {
            e.visit(&join(prefix, "enc1"), f);
        }
        if let Some(e) = &self.enc2 {
            e.visit(&join(prefix, "enc2"), f);
        }
        self.fusion.visit(&join(prefix, "fusion"), f);
        if let Some(h) = &self.hidden {
            h.visit(&join(prefix, "hidden"), f);
        }
        self.out.visit(&join(prefix, "out"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [f64])) {
        if let Some(e) = &mut self.enc1 {
            e.visit_mut(&join(prefix, "enc1"), f);
        }
        if let Some(e) = &mut self.enc2 {
            e.visit_mut(&join(prefix, "enc2"), f);
        }
        self.fusion.visit_mut(&join(prefix, "fusion"), f);
        if let Some(h) = &mut self.hidden {
            h.visit_mut(&join(prefix, "hidden"), f);
        }
        self.out.visit_mut(&join(prefix, "out"), f);
    }
}

/// A batch of bimodal inputs with labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledBatch {
    pub m1: Vec<DenseVector>,
    pub m2: Vec<DenseVector>,
    pub labels: Vec<usize>,
}

/// Result of one forward/backward pass over a batch.
#[derive(Debug, Clone)]
pub struct BatchPass {
    /// Mean cross-entropy over the batch.
    pub loss: f64,
    pub grads: ClassifierParams,
    pub logits: Vec<DenseVector>,
    /// Memory after the batch's write.
    pub memory: Vec<MemoryState>,
    /// Smallest |pre-activation| over every ReLU in the pass.
    pub kink_distance: f64,
}

/// `-ln softmax(logits)[label]` and its gradient `softmax(logits) - onehot`.
pub fn cross_entropy(logits: &[f64], label: usize) -> Result<(f64, DenseVector)> {
    if label >= logits.len() {
        return Err(param_err(format!(
            "label {label} out of range for {} classes",
            logits.len()
        )));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_z = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    let mut grad = softmax(logits)?;
    grad[label] -= 1.0;
    Ok((log_z - logits[label], grad))
}

/// Encoders, fusion stage and classification head.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    pub config: ClassifierConfig,
    pub s1: usize,
    pub s2: usize,
    pub params: ClassifierParams,
}

struct EncodeCache {
    pre: Vec<DenseVector>,
    out: Vec<DenseVector>,
}

fn min_abs(v: &[f64]) -> f64 {
    v.iter().fold(f64::INFINITY, |m, x| m.min(x.abs()))
}

impl Classifier {
    pub fn new(config: &ClassifierConfig, s1: usize, s2: usize) -> Result<Self> {
        config.validate()?;
        if s1 == 0 || s2 == 0 {
            return Err(param_err("modality dims must be >= 1"));
        }
        let mut rng = Rng::new(config.seed);
        let e = config.encoder_hidden;
        let (enc1, enc2, f1, f2) = if e > 0 {
            (
                Some(Dense::init(s1, e, &mut rng.fork(1))?),
                Some(Dense::init(s2, e, &mut rng.fork(2))?),
                e,
                e,
            )
        } else {
            (None, None, s1, s2)
        };
        let fusion = FusionParams::init(config.fusion, f1, f2, &mut rng.fork(3))?;
        let fused = fusion.output_dim();
        let mut head_rng = rng.fork(4);
        let (hidden, out) = if config.head_hidden > 0 {
            (
                Some(Dense::init(fused, config.head_hidden, &mut head_rng)?),
                Dense::init(config.head_hidden, config.classes, &mut head_rng)?,
            )
        } else {
            (None, Dense::init(fused, config.classes, &mut head_rng)?)
        };
        Ok(Self {
            config: config.clone(),
            s1,
            s2,
            params: ClassifierParams {
                enc1,
                enc2,
                fusion,
                hidden,
                out,
            },
        })
    }

    pub fn init_memory(&self, rng: &mut Rng) -> Result<Vec<MemoryState>> {
        self.params.fusion.init_memory(self.config.slots, rng)
    }

    /// Inverted-dropout masks for the head's hidden layer: entries are
    /// `0` or `1/(1-p)`. All ones when the rate is 0.
    pub fn dropout_masks(&self, batch: usize, rng: &mut Rng) -> Vec<DenseVector> {
        let width = self.config.head_hidden;
        let p = self.config.dropout_rate;
        (0..batch)
            .map(|_| {
                if p == 0.0 {
                    DenseVector::filled(width, 1.0)
                } else {
                    let keep = 1.0 / (1.0 - p);
                    (0..width)
                        .map(|_| if rng.next_f64() < p { 0.0 } else { keep })
                        .collect::<Vec<_>>()
                        .into()
                }
            })
            .collect()
    }

    fn encode_cached(&self, enc: Option<&Dense>, batch: &[DenseVector]) -> Result<EncodeCache> {
        match enc {
            None => Ok(EncodeCache {
                pre: vec![],
                out: batch.to_vec(),
            }),
            Some(layer) => {
                let pre = batch.iter().map(|x| layer.forward(x)).collect::<Result<Vec<_>>>()?;
                let out = pre.iter().map(|p| relu(p)).collect();
                Ok(EncodeCache { pre, out })
            }
        }
    }

    /// Per-mode encoder (`mode` is 1 or 2).
    pub fn encode(&self, mode: u8, batch: &[DenseVector]) -> Result<Vec<DenseVector>> {
        let (enc, dim) = match mode {
            1 => (self.params.enc1.as_ref(), self.s1),
            2 => (self.params.enc2.as_ref(), self.s2),
            _ => return Err(param_err(format!("mode must be 1 or 2, got {mode}"))),
        };
        if let Some(bad) = batch.iter().find(|x| x.len() != dim) {
            return Err(shape_err("encode", dim, bad.len()));
        }
        Ok(self.encode_cached(enc, batch)?.out)
    }

    /// Hidden dense+ReLU (times the dropout mask) then the logits layer.
    pub fn head_forward(&self, fused: &[f64], mask: Option<&[f64]>) -> Result<DenseVector> {
        Ok(self.head_cached(fused, mask)?.2)
    }

    fn head_cached(&self, fused: &[f64], mask: Option<&[f64]>) -> Result<(DenseVector, DenseVector, DenseVector)> {
        match &self.params.hidden {
            Some(hidden) => {
                let pre = hidden.forward(fused)?;
                let mut act = relu(&pre);
                if let Some(mask) = mask {
                    if mask.len() != act.len() {
                        return Err(shape_err("dropout mask", act.len(), mask.len()));
                    }
                    act.iter_mut().zip(mask).for_each(|(a, m)| *a *= m);
                }
                let logits = self.params.out.forward(&act)?;
                Ok((pre, act, logits))
            }
            None => {
                let logits = self.params.out.forward(fused)?;
                Ok((DenseVector::default(), DenseVector::default(), logits))
            }
        }
    }

    fn check_batch(&self, m1: &[DenseVector], m2: &[DenseVector]) -> Result<()> {
        if m1.is_empty() || m1.len() != m2.len() {
            return Err(shape_err("classifier batch", m1.len(), m2.len()));
        }
        if let Some(bad) = m1.iter().find(|x| x.len() != self.s1) {
            return Err(shape_err("mode 1 input", self.s1, bad.len()));
        }
        if let Some(bad) = m2.iter().find(|x| x.len() != self.s2) {
            return Err(shape_err("mode 2 input", self.s2, bad.len()));
        }
        Ok(())
    }

    /// Logits for a batch without dropout; also returns the written memory.
    pub fn predict(
        &self,
        m1: &[DenseVector],
        m2: &[DenseVector],
        memory: &[MemoryState],
    ) -> Result<(Vec<DenseVector>, Vec<MemoryState>)> {
        self.check_batch(m1, m2)?;
        let e1 = self.encode_cached(self.params.enc1.as_ref(), m1)?.out;
        let e2 = self.encode_cached(self.params.enc2.as_ref(), m2)?.out;
        let fwd = fusion_forward(&self.params.fusion, memory, &e1, &e2)?;
        let logits = fwd
            .outputs
            .iter()
            .map(|f| self.head_forward(f, None))
            .collect::<Result<Vec<_>>>()?;
        Ok((logits, fwd.memory))
    }

    /// Mean cross-entropy over the batch and its exact gradient, with
    /// `memory` held constant.
    pub fn forward_backward(
        &self,
        batch: &LabeledBatch,
        memory: &[MemoryState],
        masks: Option<&[DenseVector]>,
    ) -> Result<BatchPass> {
        self.check_batch(&batch.m1, &batch.m2)?;
        let n = batch.m1.len();
        if batch.labels.len() != n {
            return Err(shape_err("labels", n, batch.labels.len()));
        }
        if let Some(m) = masks {
            if m.len() != n {
                return Err(shape_err("dropout masks", n, m.len()));
            }
        }
        let p = &self.params;
        let enc1 = self.encode_cached(p.enc1.as_ref(), &batch.m1)?;
        let enc2 = self.encode_cached(p.enc2.as_ref(), &batch.m2)?;
        let fwd = fusion_forward(&p.fusion, memory, &enc1.out, &enc2.out)?;

        let mut kink = f64::INFINITY;
        for pre in enc1.pre.iter().chain(&enc2.pre) {
            kink = kink.min(min_abs(pre));
        }
        for (trace, unit) in fwd.traces.iter().zip(&p.fusion.units) {
            for s in &trace.steps {
                for (c, w) in s.c.iter().zip(unit.w_scale.iter()) {
                    kink = kink.min((c * w).abs());
                }
            }
        }

        let mut grads = p.zeros_like();
        let mut loss = 0.0;
        let mut logits_all = Vec::with_capacity(n);
        let mut g_fused = Vec::with_capacity(n);
        let scale = 1.0 / n as f64;
        for (i, fused) in fwd.outputs.iter().enumerate() {
            let mask = masks.map(|m| m[i].as_slice());
            let (pre, act, logits) = self.head_cached(fused, mask)?;
            let (l, mut g_logits) = cross_entropy(&logits, batch.labels[i])?;
            loss += l * scale;
            g_logits.scale(scale);
            let g = match &p.hidden {
                Some(hidden) => {
                    kink = kink.min(min_abs(&pre));
                    let mut g_act = p.out.backward(&act, &g_logits, &mut grads.out)?;
                    for j in 0..g_act.len() {
                        let m = mask.map_or(1.0, |m| m[j]);
                        g_act[j] *= if pre[j] > 0.0 { m } else { 0.0 };
                    }
                    hidden.backward(fused, &g_act, grads.hidden.as_mut().expect("hidden grads"))?
                }
                None => p.out.backward(fused, &g_logits, &mut grads.out)?,
            };
            g_fused.push(g);
            logits_all.push(logits);
        }
        if !loss.is_finite() {
            return Err(MbafError::Numeric(format!("batch loss is {loss}")));
        }

        let back = fusion_backward(&p.fusion, &fwd, memory, &g_fused)?;
        grads.fusion.load_flat(&back.grads.flatten())?;
        for (enc, cache, inputs, g_enc, g_out) in [
            (p.enc1.as_ref(), &enc1, &batch.m1, grads.enc1.as_mut(), &back.grad_m1),
            (p.enc2.as_ref(), &enc2, &batch.m2, grads.enc2.as_mut(), &back.grad_m2),
        ] {
            if let (Some(layer), Some(g_layer)) = (enc, g_enc) {
                for ((x, pre), g) in inputs.iter().zip(&cache.pre).zip(g_out) {
                    let g_pre: Vec<f64> = g
                        .iter()
                        .zip(pre.iter())
                        .map(|(g, p)| if *p > 0.0 { *g } else { 0.0 })
                        .collect();
                    layer.backward(x, &g_pre, g_layer)?;
                }
            }
        }

        Ok(BatchPass {
            loss,
            grads,
            logits: logits_all,
            memory: fwd.memory,
            kink_distance: kink,
        })
    }

    pub fn variant(&self) -> FusionVariant {
        self.config.fusion
    }
}
