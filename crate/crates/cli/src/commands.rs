use std::path::{Path, PathBuf};

use log::{info, warn};
use mbaf_core::gradcheck::{
    check_classifier, check_layer, GradReport, LayerCheckConfig, DEFAULT_STEP, DEFAULT_THRESHOLD,
};
use mbaf_core::metrics::confusion_csv;
use mbaf_core::synthdata::{gen_dataset, to_csv};
use mbaf_core::{Checkpoint, Classifier, ClassifierConfig, FusionVariant, TrainState};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::experiment::{curves_csv, eval_splits, load_splits, train_run, ParamSummary, RunMetrics};

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Usage(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

fn seed_dir(out: &Path, seed: u64, many: bool) -> PathBuf {
    if many {
        out.join(format!("seed-{seed}"))
    } else {
        out.to_path_buf()
    }
}

/// Trains one model per seed. With several seeds each run gets its own
/// `seed-<n>` directory under the output directory.
pub fn cmd_train(cfg: &ExperimentConfig) -> CliResult<Vec<RunMetrics>> {
    let seeds = cfg.run_seeds();
    let out = cfg.out_dir();
    let mut all = Vec::with_capacity(seeds.len());
    for &seed in &seeds {
        let run = train_run(cfg, cfg.fusion(), cfg.train_slots(), seed)?;
        let dir = seed_dir(&out, seed, seeds.len() > 1);
        write_json(&dir.join("metrics.json"), &run.metrics)?;
        write_text(&dir.join("curves.csv"), &curves_csv(&run.curves))?;
        write_text(&dir.join("confusion.csv"), &confusion_csv(&run.metrics.test.confusion))?;
        let ckpt_path = dir.join("checkpoint.bin");
        run.state.to_checkpoint()?.save(&ckpt_path).map_err(|e| match e {
            mbaf_core::MbafError::Io(io) => CliError::io(&ckpt_path, io),
            other => other.into(),
        })?;
        info!("wrote {}", dir.display());
        all.push(run.metrics);
    }
    Ok(all)
}

/// Rebuilds the model for the first run seed, loads `checkpoint` and
/// scores the validation and test splits. The result lands in
/// `eval_metrics.json` so it never overwrites the training record.
pub fn cmd_evaluate(cfg: &ExperimentConfig, checkpoint: Option<&Path>) -> CliResult<RunMetrics> {
    let seed = cfg.run_seeds()[0];
    let out = cfg.out_dir();
    let ckpt_path = checkpoint
        .map(Path::to_path_buf)
        .unwrap_or_else(|| out.join("checkpoint.bin"));
    if !ckpt_path.exists() {
        return Err(CliError::io(
            &ckpt_path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "checkpoint not found"),
        ));
    }
    let ckpt = Checkpoint::load(&ckpt_path)?;
    let data = load_splits(cfg, seed)?;
    let variant = cfg.fusion();
    let slots = cfg.train_slots();
    let clf = cfg.classifier_for(variant, slots, seed);
    let model = Classifier::new(&clf, data.task.s1, data.task.s2)?;
    let params = ParamSummary::of(&model);
    let mut state = TrainState::new(model)?;
    state.restore(&ckpt)?;
    let (validation, test) = eval_splits(&state, &data.val, &data.test, cfg.freeze_writes)?;
    info!("evaluate {}: test wa {:.4} ua {:.4}", variant.label(), test.wa, test.ua);
    let metrics = RunMetrics {
        command: "evaluate".into(),
        variant,
        label: variant.label(),
        seed,
        slots: variant.uses_memory().then_some(slots),
        freeze_writes: cfg.freeze_writes,
        training: None,
        validation,
        test,
        params,
        task: data.task,
        classifier: clf,
    };
    write_json(&out.join("eval_metrics.json"), &metrics)?;
    write_text(&out.join("eval_confusion.csv"), &confusion_csv(&metrics.test.confusion))?;
    Ok(metrics)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub section: String,
    pub variant: FusionVariant,
    pub label: String,
    pub slots: Option<usize>,
    pub d_out: Option<usize>,
    pub seed: u64,
    pub val_wa: f64,
    pub val_ua: f64,
    pub test_wa: f64,
    pub test_ua: f64,
    pub final_train_loss: Option<f64>,
    pub fusion_params: u64,
}

/// One cell of the ablation table, aggregated over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationCell {
    pub section: String,
    pub label: String,
    pub slots: Option<usize>,
    pub d_out: Option<usize>,
    pub runs: usize,
    pub mean_test_wa: f64,
    /// Sample standard deviation; 0 for a single run.
    pub std_test_wa: f64,
    pub mean_test_ua: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub command: String,
    pub seeds: Vec<u64>,
    pub slot_sweep: Vec<usize>,
    /// Rows in the `memory_size` section: read variants × slots × seeds.
    pub grid_rows: usize,
    pub rows: Vec<AblationRow>,
    pub cells: Vec<AblationCell>,
}

struct Job {
    section: &'static str,
    variant: FusionVariant,
    slots: usize,
}

fn plan(cfg: &ExperimentConfig) -> Vec<Job> {
    let mut jobs = Vec::new();
    for &variant in &cfg.ablation.read_variants {
        for &slots in &cfg.slot_sweep() {
            jobs.push(Job {
                section: "memory_size",
                variant,
                slots,
            });
        }
    }
    let slots = cfg.train_slots();
    if cfg.ablation.memory_location {
        jobs.push(Job {
            section: "memory_location",
            variant: FusionVariant::SingleMode(1),
            slots,
        });
    }
    for &d in &cfg.ablation.d_out_sweep {
        jobs.push(Job {
            section: "output_dim",
            variant: FusionVariant::Resampled(d),
            slots,
        });
    }
    if cfg.ablation.baseline {
        jobs.push(Job {
            section: "baseline",
            variant: FusionVariant::NaiveFusion,
            slots,
        });
    }
    jobs
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn ablation_csv(cells: &[AblationCell]) -> String {
    let mut out = String::from("section,label,slots,d_out,runs,mean_test_wa,std_test_wa,mean_test_ua\n");
    let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
    for c in cells {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            c.section,
            c.label,
            opt(c.slots),
            opt(c.d_out),
            c.runs,
            c.mean_test_wa,
            c.std_test_wa,
            c.mean_test_ua
        ));
    }
    out
}

/// Runs every planned configuration for every seed and writes
/// `ablation.json` and a per-cell `ablation.csv`.
pub fn cmd_ablate(cfg: &ExperimentConfig) -> CliResult<AblationTable> {
    let seeds = cfg.run_seeds();
    let jobs = plan(cfg);
    let mut rows = Vec::with_capacity(jobs.len() * seeds.len());
    let mut cells = Vec::with_capacity(jobs.len());
    for job in &jobs {
        let mut wa = Vec::with_capacity(seeds.len());
        let mut ua = Vec::with_capacity(seeds.len());
        let slots = job.variant.uses_memory().then_some(job.slots);
        let d_out = match job.variant {
            FusionVariant::Resampled(d) => Some(d),
            _ => None,
        };
        for &seed in &seeds {
            let run = train_run(cfg, job.variant, job.slots, seed)?;
            let m = run.metrics;
            wa.push(m.test.wa);
            ua.push(m.test.ua);
            rows.push(AblationRow {
                section: job.section.into(),
                variant: job.variant,
                label: m.label,
                slots,
                d_out,
                seed,
                val_wa: m.validation.wa,
                val_ua: m.validation.ua,
                test_wa: m.test.wa,
                test_ua: m.test.ua,
                final_train_loss: m.training.and_then(|t| t.final_train_loss),
                fusion_params: m.params.fusion_total,
            });
        }
        let (mean_test_wa, std_test_wa) = mean_std(&wa);
        cells.push(AblationCell {
            section: job.section.into(),
            label: job.variant.label(),
            slots,
            d_out,
            runs: seeds.len(),
            mean_test_wa,
            std_test_wa,
            mean_test_ua: mean_std(&ua).0,
        });
    }
    let table = AblationTable {
        command: "ablate".into(),
        grid_rows: rows.iter().filter(|r| r.section == "memory_size").count(),
        seeds,
        slot_sweep: cfg.slot_sweep(),
        rows,
        cells,
    };
    let out = cfg.out_dir();
    write_json(&out.join("ablation.json"), &table)?;
    write_text(&out.join("ablation.csv"), &ablation_csv(&table.cells))?;
    Ok(table)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckRequest {
    pub variants: Vec<FusionVariant>,
    pub seeds: u64,
    /// Fixed layer dimensions `(s1, s2, slots, batch)`; random per seed when absent.
    pub dims: Option<(usize, usize, usize, usize)>,
    /// Also check the whole classifier, including the head.
    pub classifier: bool,
    pub out: Option<PathBuf>,
}

impl Default for GradcheckRequest {
    fn default() -> Self {
        Self {
            variants: FusionVariant::all_kinds(8).to_vec(),
            seeds: 100,
            dims: None,
            classifier: false,
            out: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: FusionVariant,
    pub label: String,
    pub scope: String,
    pub checked: usize,
    pub passed: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckSummary {
    pub command: String,
    pub seeds: u64,
    pub step: f64,
    pub threshold: f64,
    pub summaries: Vec<VariantSummary>,
    pub reports: Vec<GradReport>,
    pub pass: bool,
}

fn summarize(variant: FusionVariant, scope: &str, reports: &[GradReport]) -> VariantSummary {
    VariantSummary {
        variant,
        label: variant.label(),
        scope: scope.into(),
        checked: reports.len(),
        passed: reports.iter().filter(|r| r.pass).count(),
        max_rel_error: reports.iter().map(|r| r.max_rel_error).fold(0.0, f64::max),
        max_abs_error: reports.iter().map(|r| r.max_abs_error).fold(0.0, f64::max),
    }
}

/// Small classifier used for the end-to-end gradient check.
fn classifier_check_config(variant: FusionVariant) -> ClassifierConfig {
    ClassifierConfig {
        encoder_hidden: 0,
        head_hidden: 5,
        classes: 3,
        dropout_rate: 0.3,
        fusion: variant,
        slots: 4,
        batch: 3,
        ..ClassifierConfig::default()
    }
}

/// Runs the finite-difference suite. The summary is written before the
/// verdict so a failing run still leaves its report behind.
pub fn cmd_gradcheck(req: &GradcheckRequest) -> CliResult<GradcheckSummary> {
    if req.seeds == 0 {
        return Err(CliError::Usage("--seeds must be at least 1".into()));
    }
    let mut reports = Vec::new();
    let mut summaries = Vec::new();
    for &variant in &req.variants {
        let mut layer = Vec::with_capacity(req.seeds as usize);
        for seed in 0..req.seeds {
            let config = match req.dims {
                Some((s1, s2, slots, batch)) => LayerCheckConfig::new(variant, s1, s2, slots, batch),
                None => LayerCheckConfig::random(variant, seed),
            };
            layer.push(check_layer(&config, seed)?);
        }
        summaries.push(summarize(variant, "layer", &layer));
        reports.extend(layer);
        if req.classifier {
            let clf = classifier_check_config(variant);
            let (s1, s2) = req.dims.map(|(a, b, _, _)| (a, b)).unwrap_or((3, 2));
            let mut whole = Vec::with_capacity(req.seeds as usize);
            for seed in 0..req.seeds {
                whole.push(check_classifier(
                    &ClassifierConfig { seed, ..clf.clone() },
                    s1,
                    s2,
                    seed,
                )?);
            }
            summaries.push(summarize(variant, "classifier", &whole));
            reports.extend(whole);
        }
    }
    for s in &summaries {
        let line = format!(
            "{} {}: {}/{} pass, max rel {:.3e}, max abs {:.3e}",
            s.label, s.scope, s.passed, s.checked, s.max_rel_error, s.max_abs_error
        );
        if s.passed == s.checked {
            info!("{line}");
        } else {
            warn!("{line}");
        }
    }
    let summary = GradcheckSummary {
        command: "gradcheck".into(),
        seeds: req.seeds,
        step: DEFAULT_STEP,
        threshold: DEFAULT_THRESHOLD,
        pass: summaries.iter().all(|s| s.passed == s.checked),
        summaries,
        reports,
    };
    if let Some(path) = &req.out {
        write_json(path, &summary)?;
    }
    Ok(summary)
}

/// Writes the first run seed's stream as CSV, to `out` or standard output.
pub fn cmd_gen_data(cfg: &ExperimentConfig, out: Option<&Path>) -> CliResult<usize> {
    let task = cfg.task_for(cfg.run_seeds()[0]);
    let data = gen_dataset(&task)?;
    let csv = to_csv(&data);
    match out {
        Some(path) => write_text(path, &csv)?,
        None => print!("{csv}"),
    }
    Ok(data.len())
}
