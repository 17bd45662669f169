//! A small trainable classifier around a fusion stage: optional per-mode
//! encoders, the fusion layer, a dense head and softmax cross-entropy,
//! trained with Adam.

mod adam;
mod classifier;
mod dense;
mod train;

pub use adam::{Adam, AdamConfig};
pub use classifier::{cross_entropy, BatchPass, Classifier, ClassifierConfig, ClassifierParams, LabeledBatch};
pub use dense::Dense;
pub use train::{evaluate, examples_per_epoch, predict_stream, train_epoch, TrainState};
