//! Memory-based attentive fusion of two feature streams.
//!
//! The crate provides the fusion layer with exact gradients
//! ([`fusion`]), a finite-difference checker ([`gradcheck`]), a small
//! trainable classifier around it ([`model`]), a synthetic bimodal task
//! where one modality is intermittently occluded ([`synthdata`]) and the
//! usual classification metrics ([`metrics`]).

// Index loops mirror the math in the kernels, and negated comparisons
// deliberately reject NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fusion;
pub mod gradcheck;
pub mod metrics;
pub mod model;
pub mod numcore;
pub mod params;
pub mod synthdata;

pub use error::{MbafError, Result};
pub use fusion::{
    fusion_backward, fusion_forward, mbaf_backward, mbaf_forward, param_count_actual, param_count_paper, Checkpoint,
    ForwardTrace, FusionParams, FusionVariant, MbafGrads, MbafParams, MemoryState,
};
pub use metrics::MetricsReport;
pub use model::{Classifier, ClassifierConfig, TrainState};
pub use numcore::{DenseMatrix, DenseVector, Rng};
pub use params::ParamSet;
pub use synthdata::{Sample, TaskConfig};
