//! Central finite-difference verification of the analytic gradients.
//!
//! Relative error per coordinate is `|a - n| / max(|a|, |n|, 1e-8)`.
//! Random configurations where some ReLU pre-activation sits within
//! `kink_margin` of zero are redrawn, since finite differences are not
//! valid across the kink.

use serde::{Deserialize, Serialize};

use crate::error::{param_err, shape_err, MbafError, Result};
use crate::fusion::{fusion_backward, fusion_forward, FusionParams, FusionVariant, MemoryState};
use crate::model::{Classifier, ClassifierConfig, LabeledBatch};
use crate::numcore::{DenseVector, Rng};
use crate::params::ParamSet;

pub const DEFAULT_STEP: f64 = 1e-5;
pub const DEFAULT_THRESHOLD: f64 = 1e-5;
pub const RELATIVE_FLOOR: f64 = 1e-8;
pub const DEFAULT_KINK_MARGIN: f64 = 1e-4;
pub const MAX_DIM: usize = 16;
pub const MAX_SLOTS: usize = 8;
pub const MAX_BATCH: usize = 4;
const MAX_REDRAWS: u64 = 200;

/// `[L(θ + h·e_i) - L(θ - h·e_i)] / 2h` for every coordinate.
pub fn central_diff(loss_fn: &mut dyn FnMut(&[f64]) -> Result<f64>, theta: &[f64], h: f64) -> Result<DenseVector> {
    if !(h > 0.0) {
        return Err(param_err(format!("finite-difference step must be positive, got {h}")));
    }
    let mut probe = theta.to_vec();
    let mut out = Vec::with_capacity(theta.len());
    for i in 0..theta.len() {
        probe[i] = theta[i] + h;
        let up = loss_fn(&probe)?;
        probe[i] = theta[i] - h;
        let down = loss_fn(&probe)?;
        probe[i] = theta[i];
        if !up.is_finite() || !down.is_finite() {
            return Err(MbafError::Numeric(format!("loss not finite around coordinate {i}")));
        }
        out.push((up - down) / (2.0 * h));
    }
    Ok(DenseVector::new(out))
}

/// Central differences of `Σ f(θ)²` for a vector-valued `f`.
///
/// Each coordinate is formed as `Σ (f⁺ − f⁻)(f⁺ + f⁻) / 2h`, which matches
/// `central_diff` on the scalar sum of squares but never subtracts two large
/// loss values, so its noise floor tracks the output entries rather than ulp(L).
pub fn central_diff_sum_sq(
    output_fn: &mut dyn FnMut(&[f64]) -> Result<Vec<f64>>,
    theta: &[f64],
    h: f64,
) -> Result<DenseVector> {
    if !(h > 0.0) {
        return Err(param_err(format!("finite-difference step must be positive, got {h}")));
    }
    let mut probe = theta.to_vec();
    let mut out = Vec::with_capacity(theta.len());
    for i in 0..theta.len() {
        probe[i] = theta[i] + h;
        let up = output_fn(&probe)?;
        probe[i] = theta[i] - h;
        let down = output_fn(&probe)?;
        probe[i] = theta[i];
        if up.len() != down.len() {
            return Err(shape_err(
                "central_diff_sum_sq",
                format!("{}", up.len()),
                format!("{}", down.len()),
            ));
        }
        if up.iter().chain(&down).any(|v| !v.is_finite()) {
            return Err(MbafError::Numeric(format!("output not finite around coordinate {i}")));
        }
        let diff: f64 = up.iter().zip(&down).map(|(u, d)| (u - d) * (u + d)).sum();
        out.push(diff / (2.0 * h));
    }
    Ok(DenseVector::new(out))
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let diff = (analytic - numeric).abs();
    if diff == 0.0 {
        return 0.0;
    }
    diff / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockReport {
    pub name: String,
    pub len: usize,
    pub max_rel_error: f64,
    pub mean_rel_error: f64,
    pub worst_index: usize,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
    pub max_abs_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradReport {
    pub label: String,
    pub seed: u64,
    pub threshold: f64,
    pub blocks: Vec<BlockReport>,
    pub max_rel_error: f64,
    /// Largest |analytic − numeric| over every coordinate.
    pub max_abs_error: f64,
    /// Random draws rejected for sitting near a ReLU kink.
    pub redraws: u64,
    pub pass: bool,
}

impl GradReport {
    pub fn worst_block(&self) -> Option<&BlockReport> {
        self.blocks
            .iter()
            .max_by(|a, b| a.max_rel_error.total_cmp(&b.max_rel_error))
    }
}

/// Compares flat gradients block by block.
pub fn compare(
    label: String,
    seed: u64,
    layout: &[(String, usize)],
    analytic: &[f64],
    numeric: &[f64],
    threshold: f64,
) -> Result<GradReport> {
    let total: usize = layout.iter().map(|(_, n)| n).sum();
    if analytic.len() != total || numeric.len() != total {
        return Err(param_err(format!(
            "gradient lengths {} / {} do not match layout {total}",
            analytic.len(),
            numeric.len()
        )));
    }
    let mut blocks = Vec::with_capacity(layout.len());
    let mut offset = 0;
    for (name, len) in layout {
        let mut report = BlockReport {
            name: name.clone(),
            len: *len,
            max_rel_error: 0.0,
            mean_rel_error: 0.0,
            worst_index: 0,
            worst_analytic: 0.0,
            worst_numeric: 0.0,
            max_abs_error: 0.0,
        };
        for i in 0..*len {
            let (a, n) = (analytic[offset + i], numeric[offset + i]);
            let e = relative_error(a, n);
            report.mean_rel_error += e / *len as f64;
            report.max_abs_error = report.max_abs_error.max((a - n).abs());
            if e > report.max_rel_error {
                report.max_rel_error = e;
                report.worst_index = i;
                report.worst_analytic = a;
                report.worst_numeric = n;
            }
        }
        offset += len;
        blocks.push(report);
    }
    let max_rel_error = blocks.iter().map(|b| b.max_rel_error).fold(0.0, f64::max);
    let max_abs_error = blocks.iter().map(|b| b.max_abs_error).fold(0.0, f64::max);
    Ok(GradReport {
        label,
        seed,
        threshold,
        blocks,
        max_rel_error,
        max_abs_error,
        redraws: 0,
        pass: max_rel_error < threshold,
    })
}

/// Dimensions and tolerances of one fusion-layer check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerCheckConfig {
    pub variant: FusionVariant,
    pub s1: usize,
    pub s2: usize,
    pub slots: usize,
    pub batch: usize,
    pub step: f64,
    pub threshold: f64,
    pub kink_margin: f64,
    /// All weights zero; the kink filter is skipped.
    pub zero_weights: bool,
}

impl LayerCheckConfig {
    pub fn new(variant: FusionVariant, s1: usize, s2: usize, slots: usize, batch: usize) -> Self {
        Self {
            variant,
            s1,
            s2,
            slots,
            batch,
            step: DEFAULT_STEP,
            threshold: DEFAULT_THRESHOLD,
            kink_margin: DEFAULT_KINK_MARGIN,
            zero_weights: false,
        }
    }

    /// Random dimensions within the caps, derived from `seed`.
    pub fn random(variant: FusionVariant, seed: u64) -> Self {
        let mut rng = Rng::new(seed ^ 0x005E_ED0F_D1FF);
        let s1 = 1 + rng.below(MAX_DIM / 2);
        let s2 = 1 + rng.below(MAX_DIM / 2);
        let slots = 1 + rng.below(MAX_SLOTS);
        let batch = 1 + rng.below(MAX_BATCH);
        let variant = match variant {
            FusionVariant::Resampled(_) => FusionVariant::Resampled(1 + rng.below(8)),
            FusionVariant::SingleMode(_) => FusionVariant::SingleMode(1 + rng.below(2) as u8),
            v => v,
        };
        Self::new(variant, s1, s2, slots, batch)
    }

    pub fn validate(&self) -> Result<()> {
        self.variant.validate()?;
        let d = self.s1 + self.s2;
        if self.s1 == 0 || self.s2 == 0 || d > MAX_DIM {
            return Err(param_err(format!("s1 + s2 must be in 2..={MAX_DIM}, got {d}")));
        }
        if self.slots == 0 || self.slots > MAX_SLOTS {
            return Err(param_err(format!(
                "slots must be in 1..={MAX_SLOTS}, got {}",
                self.slots
            )));
        }
        if self.batch == 0 || self.batch > MAX_BATCH {
            return Err(param_err(format!(
                "batch must be in 1..={MAX_BATCH}, got {}",
                self.batch
            )));
        }
        Ok(())
    }
}

fn random_batch(rng: &mut Rng, n: usize, dim: usize) -> Vec<DenseVector> {
    (0..n)
        .map(|_| DenseVector::new((0..dim).map(|_| rng.next_normal()).collect()))
        .collect()
}

fn fusion_outputs(
    params: &FusionParams,
    memory: &[MemoryState],
    m1: &[DenseVector],
    m2: &[DenseVector],
) -> Result<Vec<f64>> {
    let fwd = fusion_forward(params, memory, m1, m2)?;
    Ok(fwd.outputs.iter().flat_map(|o| o.iter().copied()).collect())
}

fn smallest_kink_distance(params: &FusionParams, fwd: &crate::fusion::FusionForward) -> f64 {
    let mut min = f64::INFINITY;
    for (trace, unit) in fwd.traces.iter().zip(&params.units) {
        for step in &trace.steps {
            for (c, w) in step.c.iter().zip(unit.w_scale.iter()) {
                min = min.min((c * w).abs());
            }
        }
    }
    min
}

/// Checks `fusion_backward` for loss `Σ ||o||²` against central differences
/// over every parameter block and both input batches.
pub fn check_layer(config: &LayerCheckConfig, seed: u64) -> Result<GradReport> {
    config.validate()?;
    let (s1, s2, b) = (config.s1, config.s2, config.batch);
    let mut root = Rng::new(seed);

    for attempt in 0..MAX_REDRAWS {
        let mut rng = root.fork(attempt);
        let mut params = FusionParams::init(config.variant, s1, s2, &mut rng)?;
        if config.zero_weights {
            params.load_flat(&vec![0.0; params.num_params()])?;
        }
        let memory = params.init_memory(config.slots, &mut rng)?;
        let m1 = random_batch(&mut rng, b, s1);
        let m2 = random_batch(&mut rng, b, s2);

        let fwd = fusion_forward(&params, &memory, &m1, &m2)?;
        if !config.zero_weights && smallest_kink_distance(&params, &fwd) < config.kink_margin {
            continue;
        }
        let grad_out: Vec<DenseVector> = fwd
            .outputs
            .iter()
            .map(|o| o.iter().map(|v| 2.0 * v).collect::<Vec<_>>().into())
            .collect();
        let back = fusion_backward(&params, &fwd, &memory, &grad_out)?;

        let mut analytic = back.grads.flatten();
        analytic.extend(back.grad_m1.iter().flat_map(|g| g.iter().copied()));
        analytic.extend(back.grad_m2.iter().flat_map(|g| g.iter().copied()));

        let n_params = params.num_params();
        let mut theta = params.flatten();
        theta.extend(m1.iter().flat_map(|v| v.iter().copied()));
        theta.extend(m2.iter().flat_map(|v| v.iter().copied()));

        let mut probe_params = params.clone();
        let mut outputs = |flat: &[f64]| -> Result<Vec<f64>> {
            probe_params.load_flat(&flat[..n_params])?;
            let rest = &flat[n_params..];
            let p1: Vec<DenseVector> = rest[..b * s1].chunks(s1).map(DenseVector::from).collect();
            let p2: Vec<DenseVector> = rest[b * s1..].chunks(s2).map(DenseVector::from).collect();
            fusion_outputs(&probe_params, &memory, &p1, &p2)
        };
        let numeric = central_diff_sum_sq(&mut outputs, &theta, config.step)?;

        let mut layout = params.block_layout();
        layout.push(("input.m1".into(), b * s1));
        layout.push(("input.m2".into(), b * s2));
        let mut report = compare(
            config.variant.to_string(),
            seed,
            &layout,
            &analytic,
            &numeric,
            config.threshold,
        )?;
        report.redraws = attempt;
        return Ok(report);
    }
    Err(MbafError::Numeric(format!(
        "no kink-free configuration found in {MAX_REDRAWS} draws"
    )))
}

/// End-to-end check of the classifier (encoders, fusion, head, loss) with
/// dropout masks and memory held fixed.
pub fn check_classifier(config: &ClassifierConfig, s1: usize, s2: usize, seed: u64) -> Result<GradReport> {
    let mut root = Rng::new(seed);
    for attempt in 0..MAX_REDRAWS {
        let mut rng = root.fork(attempt);
        let mut cfg = config.clone();
        cfg.seed = rng.next_u64();
        let model = Classifier::new(&cfg, s1, s2)?;
        let memory = model.init_memory(&mut rng)?;
        let batch = LabeledBatch {
            m1: random_batch(&mut rng, cfg.batch, s1),
            m2: random_batch(&mut rng, cfg.batch, s2),
            labels: (0..cfg.batch).map(|_| rng.below(cfg.classes)).collect(),
        };
        let masks = model.dropout_masks(cfg.batch, &mut rng);
        let pass = model.forward_backward(&batch, &memory, Some(&masks))?;
        if pass.kink_distance < DEFAULT_KINK_MARGIN {
            continue;
        }
        let analytic = pass.grads.flatten();
        let theta = model.params.flatten();
        let mut probe = model.clone();
        let mut loss = |flat: &[f64]| -> Result<f64> {
            probe.params.load_flat(flat)?;
            Ok(probe.forward_backward(&batch, &memory, Some(&masks))?.loss)
        };
        let numeric = central_diff(&mut loss, &theta, DEFAULT_STEP)?;
        let mut report = compare(
            format!("classifier/{}", cfg.fusion),
            seed,
            &model.params.block_layout(),
            &analytic,
            &numeric,
            DEFAULT_THRESHOLD,
        )?;
        report.redraws = attempt;
        return Ok(report);
    }
    Err(MbafError::Numeric(format!(
        "no kink-free configuration found in {MAX_REDRAWS} draws"
    )))
}
