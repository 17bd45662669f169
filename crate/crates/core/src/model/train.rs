use crate::error::{param_err, MbafError, Result};
use crate::fusion::{Checkpoint, MemoryState};
use crate::metrics::{compute_report, confusion_matrix, MetricsReport};
use crate::numcore::{DenseVector, Rng};
use crate::params::ParamSet;
use crate::synthdata::Sample;

use super::adam::{Adam, AdamConfig};
use super::classifier::{Classifier, LabeledBatch};

/// Everything a training run owns.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub model: Classifier,
    pub memory: Vec<MemoryState>,
    pub adam: Adam,
    /// Drives memory initialisation and dropout.
    pub rng: Rng,
}

impl TrainState {
    pub fn new(model: Classifier) -> Result<Self> {
        let mut rng = Rng::new(model.config.seed).fork(0x004D_454D);
        let memory = model.init_memory(&mut rng)?;
        let adam = Adam::new(model.params.num_params());
        Ok(Self {
            model,
            memory,
            adam,
            rng,
        })
    }

    pub fn step(&self) -> u64 {
        self.adam.step
    }

    /// Parameters and memory under the `model` / `model.fusion` prefixes.
    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let mut ckpt = Checkpoint::new();
        ckpt.push_params("model", &self.model.params)?;
        ckpt.push_memory("model.fusion", &self.memory);
        Ok(ckpt)
    }

    pub fn restore(&mut self, ckpt: &Checkpoint) -> Result<()> {
        ckpt.restore_params("model", &mut self.model.params)?;
        ckpt.restore_memory("model.fusion", &mut self.memory)
    }
}

fn batch_of(samples: &[Sample]) -> LabeledBatch {
    LabeledBatch {
        m1: samples.iter().map(|s| s.m1.clone()).collect(),
        m2: samples.iter().map(|s| s.m2.clone()).collect(),
        labels: samples.iter().map(|s| s.label).collect(),
    }
}

/// Number of examples one epoch consumes: full batches only.
pub fn examples_per_epoch(len: usize, batch: usize) -> usize {
    batch * (len / batch)
}

/// One pass over `dataset` in stream order, one Adam step per full batch;
/// the ragged tail is dropped. Returns the mean batch loss.
pub fn train_epoch(state: &mut TrainState, dataset: &[Sample]) -> Result<f64> {
    let cfg = state.model.config.clone();
    if dataset.is_empty() {
        return Err(param_err("training set is empty"));
    }
    let batches = dataset.len() / cfg.batch;
    if batches == 0 {
        return Err(param_err(format!(
            "training set of {} is smaller than one batch of {}",
            dataset.len(),
            cfg.batch
        )));
    }
    if cfg.reinit_memory_each_epoch {
        state.memory = state.model.init_memory(&mut state.rng)?;
    }
    let adam_cfg = AdamConfig::with_lr(cfg.lr);
    let mut total = 0.0;
    for chunk in dataset.chunks_exact(cfg.batch) {
        let batch = batch_of(chunk);
        let masks = state.model.dropout_masks(cfg.batch, &mut state.rng);
        let pass = state.model.forward_backward(&batch, &state.memory, Some(&masks))?;
        if !pass.memory.iter().all(|m| m.matrix().is_finite()) {
            return Err(MbafError::Numeric("memory diverged".into()));
        }
        if !pass.grads.flatten().iter().all(|g| g.is_finite()) {
            return Err(MbafError::Numeric("gradient is not finite".into()));
        }
        state.adam.update(&mut state.model.params, &pass.grads, &adam_cfg)?;
        if !state.model.params.flatten().iter().all(|x| x.is_finite()) {
            return Err(MbafError::Numeric("parameters diverged".into()));
        }
        state.memory = pass.memory;
        total += pass.loss;
    }
    Ok(total / batches as f64)
}

fn argmax(v: &DenseVector) -> usize {
    v.iter()
        .enumerate()
        .fold(
            (0, f64::NEG_INFINITY),
            |(bi, bv), (i, &x)| if x > bv { (i, x) } else { (bi, bv) },
        )
        .0
}

/// Predicted classes in stream order, starting from the state's memory.
///
/// Batches are the training batch size; a short final batch is still
/// evaluated. Returns the memory after the last batch.
pub fn predict_stream(
    state: &TrainState,
    dataset: &[Sample],
    freeze_writes: bool,
) -> Result<(Vec<usize>, Vec<MemoryState>)> {
    if dataset.is_empty() {
        return Err(param_err("evaluation set is empty"));
    }
    let mut memory = state.memory.clone();
    memory.iter_mut().for_each(|m| m.writes_enabled = !freeze_writes);
    let mut predictions = Vec::with_capacity(dataset.len());
    for chunk in dataset.chunks(state.model.config.batch) {
        let b = batch_of(chunk);
        let (logits, next) = state.model.predict(&b.m1, &b.m2, &memory)?;
        predictions.extend(logits.iter().map(argmax));
        memory = next;
    }
    memory.iter_mut().for_each(|m| m.writes_enabled = true);
    Ok((predictions, memory))
}

/// Metrics on `dataset`, dropout off. The state itself is not modified.
pub fn evaluate(state: &TrainState, dataset: &[Sample], freeze_writes: bool) -> Result<MetricsReport> {
    let (pred, _) = predict_stream(state, dataset, freeze_writes)?;
    let truth: Vec<usize> = dataset.iter().map(|s| s.label).collect();
    compute_report(&confusion_matrix(&truth, &pred, state.model.config.classes)?)
}
