//! A single training run and the records it produces.

use std::fmt::Write as _;

use log::{debug, info};
use mbaf_core::fusion::FusionParams;
use mbaf_core::model::{evaluate, examples_per_epoch, predict_stream, train_epoch};
use mbaf_core::synthdata::{gen_dataset, split};
use mbaf_core::{
    param_count_actual, param_count_paper, Classifier, ClassifierConfig, FusionVariant, MetricsReport, ParamSet,
    Sample, TaskConfig, TrainState,
};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::CliResult;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRow {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_wa: f64,
    pub val_ua: f64,
}

pub fn curves_csv(rows: &[EpochRow]) -> String {
    let mut out = String::from("epoch,train_loss,val_wa,val_ua\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.epoch, r.train_loss, r.val_wa, r.val_ua);
    }
    out
}

/// Parameter count of the memory units next to the closed-form estimate
/// `3d² + (q+2)d` with `q` the batch size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitCount {
    pub q: u64,
    pub unit_dims: Vec<usize>,
    pub actual: u64,
    pub formula: u64,
    /// `formula − actual`, which works out to `(q − 1)·Σd`.
    pub gap: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub model_total: u64,
    pub fusion_total: u64,
    /// Absent for the memoryless baseline.
    pub memory_units: Option<UnitCount>,
}

impl ParamSummary {
    pub fn of(model: &Classifier) -> Self {
        let fusion: &FusionParams = &model.params.fusion;
        let q = model.config.batch as u64;
        let memory_units = (!fusion.units.is_empty()).then(|| {
            let unit_dims: Vec<usize> = fusion.units.iter().map(|u| u.dim()).collect();
            let actual: u64 = fusion.units.iter().map(param_count_actual).sum();
            let formula: u64 = unit_dims.iter().map(|&d| param_count_paper(d as u64, 0, q)).sum();
            UnitCount {
                q,
                unit_dims,
                actual,
                formula,
                gap: formula as i64 - actual as i64,
            }
        });
        Self {
            model_total: model.params.num_params() as u64,
            fusion_total: fusion.num_params() as u64,
            memory_units,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub epochs: usize,
    pub examples_per_epoch: usize,
    /// `None` when no epoch ran.
    pub final_train_loss: Option<f64>,
}

/// Contents of `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub command: String,
    pub variant: FusionVariant,
    pub label: String,
    pub seed: u64,
    pub slots: Option<usize>,
    pub freeze_writes: bool,
    pub training: Option<TrainingSummary>,
    pub validation: MetricsReport,
    pub test: MetricsReport,
    pub params: ParamSummary,
    pub task: TaskConfig,
    pub classifier: ClassifierConfig,
}

pub struct Splits {
    pub task: TaskConfig,
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
    pub test: Vec<Sample>,
}

pub fn load_splits(cfg: &ExperimentConfig, seed: u64) -> CliResult<Splits> {
    let task = cfg.task_for(seed);
    let data = gen_dataset(&task)?;
    let (train, val, test) = split(&data, cfg.split.train, cfg.split.val)?;
    Ok(Splits { task, train, val, test })
}

/// Validation metrics from the state's memory, then test metrics from the
/// memory the validation stream left behind.
pub fn eval_splits(
    state: &TrainState,
    val: &[Sample],
    test: &[Sample],
    freeze_writes: bool,
) -> CliResult<(MetricsReport, MetricsReport)> {
    let val_report = evaluate(state, val, freeze_writes)?;
    let (_, memory) = predict_stream(state, val, freeze_writes)?;
    let mut after_val = state.clone();
    after_val.memory = memory;
    let test_report = evaluate(&after_val, test, freeze_writes)?;
    Ok((val_report, test_report))
}

pub struct RunOutcome {
    pub state: TrainState,
    pub curves: Vec<EpochRow>,
    pub metrics: RunMetrics,
}

pub fn train_run(cfg: &ExperimentConfig, variant: FusionVariant, slots: usize, seed: u64) -> CliResult<RunOutcome> {
    let data = load_splits(cfg, seed)?;
    let clf = cfg.classifier_for(variant, slots, seed);
    let model = Classifier::new(&clf, data.task.s1, data.task.s2)?;
    let params = ParamSummary::of(&model);
    let mut state = TrainState::new(model)?;
    info!(
        "train {} slots={} seed={}: {} train / {} val / {} test, {} parameters",
        variant.label(),
        slots,
        seed,
        data.train.len(),
        data.val.len(),
        data.test.len(),
        params.model_total
    );

    let mut curves = Vec::with_capacity(clf.epochs);
    for epoch in 1..=clf.epochs {
        let train_loss = train_epoch(&mut state, &data.train)?;
        let val = evaluate(&state, &data.val, cfg.freeze_writes)?;
        debug!(
            "epoch {epoch}: loss {train_loss:.5} val wa {:.4} ua {:.4}",
            val.wa, val.ua
        );
        curves.push(EpochRow {
            epoch,
            train_loss,
            val_wa: val.wa,
            val_ua: val.ua,
        });
    }

    let (validation, test) = eval_splits(&state, &data.val, &data.test, cfg.freeze_writes)?;
    info!(
        "{} seed={}: test wa {:.4} ua {:.4}",
        variant.label(),
        seed,
        test.wa,
        test.ua
    );
    let metrics = RunMetrics {
        command: "train".into(),
        variant,
        label: variant.label(),
        seed,
        slots: variant.uses_memory().then_some(slots),
        freeze_writes: cfg.freeze_writes,
        training: Some(TrainingSummary {
            epochs: clf.epochs,
            examples_per_epoch: examples_per_epoch(data.train.len(), clf.batch),
            final_train_loss: curves.last().map(|r| r.train_loss),
        }),
        validation,
        test,
        params,
        task: data.task,
        classifier: clf,
    };
    Ok(RunOutcome { state, curves, metrics })
}
