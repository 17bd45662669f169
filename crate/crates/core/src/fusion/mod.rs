//! The memory-based attentive fusion layer, its analytic backward pass, the
//! concatenation baseline and the ablation variants.

mod backward;
mod block;
mod checkpoint;
mod layer;
mod memory;
mod params;
mod variant;

pub use backward::{mbaf_backward, MbafBackward};
pub use block::{fusion_backward, fusion_forward, FusionBackward, FusionForward, FusionGrads, FusionParams};
pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use layer::{
    compose, fuse_output, mbaf_forward, naive_fusion, read_key, read_slot, resample_output, swap_concat, transform,
    Composition, ForwardTrace, MbafForward, StepTrace,
};
pub use memory::{memory_init, write_memory, MemoryState};
pub use params::{param_count_actual, param_count_paper, MbafGrads, MbafParams};
pub use variant::FusionVariant;
