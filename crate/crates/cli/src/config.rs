//! Experiment configuration files and command-line overrides.

use std::path::{Path, PathBuf};

use mbaf_core::{ClassifierConfig, FusionVariant, TaskConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Memory sizes swept by `ablate` when the config names none.
pub const DEFAULT_SLOT_SWEEP: [usize; 6] = [10, 20, 30, 40, 50, 100];
pub const DEFAULT_D_OUT_SWEEP: [usize; 5] = [512, 1024, 2048, 4096, 8192];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    pub train: f64,
    pub val: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self { train: 0.8, val: 0.1 }
    }
}

/// Which ablation sections `ablate` runs besides the memory-size grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AblationPlan {
    /// Read functions crossed with the slot sweep.
    pub read_variants: Vec<FusionVariant>,
    /// Run the per-mode memory variant at the classifier's slot count.
    pub memory_location: bool,
    /// Output widths for the resampled variant; empty skips the section.
    pub d_out_sweep: Vec<usize>,
    /// Run the memoryless concatenation baseline.
    pub baseline: bool,
}

impl Default for AblationPlan {
    fn default() -> Self {
        Self {
            read_variants: vec![FusionVariant::NaiveAttention, FusionVariant::CrossAttention],
            memory_location: true,
            d_out_sweep: DEFAULT_D_OUT_SWEEP.to_vec(),
            baseline: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: TaskConfig,
    pub classifier: ClassifierConfig,
    /// Overrides `classifier.fusion` when set.
    #[serde(default)]
    pub variant: Option<FusionVariant>,
    /// Slot counts; `train` uses the first, `ablate` sweeps them all.
    #[serde(default)]
    pub slots: Option<Vec<usize>>,
    /// Run seeds; each drives model init and offsets the task seed.
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub split: SplitConfig,
    /// Evaluate with memory writes disabled.
    #[serde(default)]
    pub freeze_writes: bool,
    #[serde(default)]
    pub ablation: AblationPlan,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub slots: Option<Vec<usize>>,
    pub variants: Option<Vec<FusionVariant>>,
    pub freeze_writes: bool,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str, path: &Path) -> CliResult<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate(path)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text, path)
    }

    pub fn validate(&self, path: &Path) -> CliResult<()> {
        let bad = |message: String| CliError::Config {
            path: path.to_path_buf(),
            message,
        };
        self.task.validate().map_err(|e| bad(e.to_string()))?;
        self.classifier.validate().map_err(|e| bad(e.to_string()))?;
        if let Some(v) = self.variant {
            v.validate().map_err(|e| bad(e.to_string()))?;
        }
        if self.classifier.classes != self.task.classes {
            return Err(bad(format!(
                "classifier.classes = {} but task.classes = {}",
                self.classifier.classes, self.task.classes
            )));
        }
        if matches!(&self.slots, Some(s) if s.is_empty() || s.contains(&0)) {
            return Err(bad("slots must be a nonempty list of positive counts".into()));
        }
        if matches!(&self.seeds, Some(s) if s.is_empty()) {
            return Err(bad("seeds must not be empty".into()));
        }
        let s = &self.split;
        if !(s.train > 0.0 && s.val > 0.0 && s.train + s.val < 1.0) {
            return Err(bad(format!(
                "split ({}, {}) must be positive with sum < 1",
                s.train, s.val
            )));
        }
        if self.ablation.d_out_sweep.contains(&0) {
            return Err(bad("d_out_sweep entries must be positive".into()));
        }
        Ok(())
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seeds = Some(vec![seed]);
        }
        if let Some(slots) = &o.slots {
            self.slots = Some(slots.clone());
        }
        if let Some(v) = &o.variants {
            if let [single] = v.as_slice() {
                self.variant = Some(*single);
            }
            self.ablation.read_variants = v.clone();
        }
        self.freeze_writes |= o.freeze_writes;
        if let Some(out) = &o.out {
            self.out_dir = Some(out.clone());
        }
    }

    pub fn fusion(&self) -> FusionVariant {
        self.variant.unwrap_or(self.classifier.fusion)
    }

    pub fn train_slots(&self) -> usize {
        self.slots
            .as_ref()
            .and_then(|s| s.first().copied())
            .unwrap_or(self.classifier.slots)
    }

    pub fn slot_sweep(&self) -> Vec<usize> {
        self.slots.clone().unwrap_or_else(|| DEFAULT_SLOT_SWEEP.to_vec())
    }

    pub fn run_seeds(&self) -> Vec<u64> {
        self.seeds.clone().unwrap_or_else(|| vec![self.classifier.seed])
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    /// The task stream for one run seed.
    pub fn task_for(&self, seed: u64) -> TaskConfig {
        TaskConfig {
            seed: self.task.seed.wrapping_add(seed),
            ..self.task.clone()
        }
    }

    pub fn classifier_for(&self, variant: FusionVariant, slots: usize, seed: u64) -> ClassifierConfig {
        ClassifierConfig {
            fusion: variant,
            slots,
            seed,
            ..self.classifier.clone()
        }
    }
}
