//! Forward pass of the memory fusion layer.
//!
//! Per example, with `M` the memory before the batch:
//!
//! ```text
//! x   = m1 ⊕ m2                      (or m_i alone for single-mode)
//! z   = softmax_j <W_rᵀx + b_r, M[j]>
//! m_r = Σ_j z_j M[j]
//! b   = W_cᵀ(q ⊕ m_r) + b_c          q = x, or m2 ⊕ m1 for cross-attention
//! α   = softmax(b)
//! c   = α ∘ b
//! h   = relu(c ∘ w_scale)
//! o   = x + h
//! ```
//!
//! After the batch, one aggregated erase/add write produces the next memory.

use crate::error::{param_err, shape_err, Result};
use crate::numcore::{concat, hadamard, relu, softmax, DenseMatrix, DenseVector};

use super::memory::{write_memory, MemoryState};
use super::params::MbafParams;
use super::variant::FusionVariant;

/// Slot attention weights for one input.
pub fn read_key(params: &MbafParams, x: &[f64], mem: &MemoryState) -> Result<DenseVector> {
    if x.len() != mem.dim() || x.len() != params.dim() {
        return Err(shape_err("read_key", mem.dim(), x.len()));
    }
    let mut key = params.w_r.tmatvec(x)?;
    key.add_assign(&params.b_r);
    let scores: Vec<f64> = (0..mem.slots()).map(|j| key.dot(mem.row(j))).collect();
    softmax(&scores)
}

/// Attention-weighted sum of memory rows.
pub fn read_slot(z: &[f64], mem: &MemoryState) -> Result<DenseVector> {
    if z.len() != mem.slots() {
        return Err(shape_err("read_slot", mem.slots(), z.len()));
    }
    mem.matrix().tmatvec(z)
}

/// Output of the composer for one example.
#[derive(Debug, Clone, PartialEq)]
pub struct Composition {
    pub b: DenseVector,
    pub alpha: DenseVector,
    pub c: DenseVector,
}

pub fn compose(params: &MbafParams, query: &[f64], m_r: &[f64]) -> Result<Composition> {
    let d = params.dim();
    if query.len() != d || m_r.len() != d {
        return Err(shape_err("compose", d, format!("({}, {})", query.len(), m_r.len())));
    }
    let joined = concat(query, m_r)?;
    let mut b = params.w_c.tmatvec(&joined)?;
    b.add_assign(&params.b_c);
    let alpha = softmax(&b)?;
    let c = hadamard(&alpha, &b)?;
    Ok(Composition { b, alpha, c })
}

/// `relu(c ∘ w_scale)`.
pub fn transform(params: &MbafParams, c: &[f64]) -> Result<DenseVector> {
    if c.len() != params.dim() {
        return Err(shape_err("transform", params.dim(), c.len()));
    }
    Ok(relu(&hadamard(c, &params.w_scale)?))
}

/// Sums the stacked pair `x ⊕ h` along the stacking axis, i.e. `x + h`.
pub fn fuse_output(x: &[f64], h: &[f64]) -> Result<DenseVector> {
    if x.len() != h.len() {
        return Err(shape_err("fuse_output", x.len(), h.len()));
    }
    Ok(x.iter().zip(h).map(|(a, b)| a + b).collect::<Vec<_>>().into())
}

/// `m2 ⊕ m1`.
pub fn swap_concat(m1: &[f64], m2: &[f64]) -> Result<DenseVector> {
    concat(m2, m1)
}

/// Concatenation baseline: `m1 ⊕ m2` per example.
pub fn naive_fusion(batch_m1: &[DenseVector], batch_m2: &[DenseVector]) -> Result<Vec<DenseVector>> {
    batch_dims(batch_m1, batch_m2)?;
    batch_m1.iter().zip(batch_m2).map(|(a, b)| concat(a, b)).collect()
}

/// Learned linear resampling `projᵀ·o` to `proj.cols()` dimensions.
pub fn resample_output(o: &[f64], proj: &DenseMatrix) -> Result<DenseVector> {
    if o.len() != proj.rows() {
        return Err(shape_err("resample_output", proj.rows(), o.len()));
    }
    proj.tmatvec(o)
}

/// Validates a bimodal batch and returns `(s1, s2)`.
pub(crate) fn batch_dims(batch_m1: &[DenseVector], batch_m2: &[DenseVector]) -> Result<(usize, usize)> {
    if batch_m1.is_empty() {
        return Err(param_err("empty batch"));
    }
    if batch_m1.len() != batch_m2.len() {
        return Err(shape_err("batch size", batch_m1.len(), batch_m2.len()));
    }
    let s1 = batch_m1[0].len();
    let s2 = batch_m2[0].len();
    if s1 == 0 || s2 == 0 {
        return Err(shape_err("modality dims", "nonzero", format!("({s1}, {s2})")));
    }
    if let Some(bad) = batch_m1.iter().find(|v| v.len() != s1) {
        return Err(shape_err("mode 1 dim", s1, bad.len()));
    }
    if let Some(bad) = batch_m2.iter().find(|v| v.len() != s2) {
        return Err(shape_err("mode 2 dim", s2, bad.len()));
    }
    Ok((s1, s2))
}

/// Cached intermediates of one example.
#[derive(Debug, Clone, PartialEq)]
pub struct StepTrace {
    pub x: DenseVector,
    pub z: DenseVector,
    pub m_r: DenseVector,
    /// Composer input `query ⊕ m_r`.
    pub pre_mlp: DenseVector,
    pub b: DenseVector,
    pub alpha: DenseVector,
    pub c: DenseVector,
    pub h: DenseVector,
    pub o: DenseVector,
}

/// Everything the backward pass needs from one forward call.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub variant: FusionVariant,
    pub s1: usize,
    pub s2: usize,
    pub steps: Vec<StepTrace>,
}

#[derive(Debug, Clone)]
pub struct MbafForward {
    pub outputs: Vec<DenseVector>,
    pub trace: ForwardTrace,
    pub memory: MemoryState,
}

/// Runs one batch through the layer.
///
/// Reads for every example use `mem`; the returned memory reflects a single
/// aggregated write. `Resampled` runs the naive-attention core here and
/// leaves the projection to the caller; `NaiveFusion` has no memory layer
/// and is rejected.
pub fn mbaf_forward(
    params: &MbafParams,
    mem: &MemoryState,
    variant: FusionVariant,
    batch_m1: &[DenseVector],
    batch_m2: &[DenseVector],
) -> Result<MbafForward> {
    variant.validate()?;
    let (s1, s2) = batch_dims(batch_m1, batch_m2)?;
    let input_dim = match variant {
        FusionVariant::NaiveFusion => return Err(param_err("naive fusion has no memory layer; use naive_fusion")),
        FusionVariant::SingleMode(1) => s1,
        FusionVariant::SingleMode(_) => s2,
        _ => s1 + s2,
    };
    if input_dim != params.dim() || input_dim != mem.dim() {
        return Err(shape_err(
            "mbaf_forward",
            format!("layer dim {} / memory dim {}", params.dim(), mem.dim()),
            input_dim,
        ));
    }

    let mut steps = Vec::with_capacity(batch_m1.len());
    for (m1, m2) in batch_m1.iter().zip(batch_m2) {
        let x = match variant {
            FusionVariant::SingleMode(1) => m1.clone(),
            FusionVariant::SingleMode(_) => m2.clone(),
            _ => concat(m1, m2)?,
        };
        let z = read_key(params, &x, mem)?;
        let m_r = read_slot(&z, mem)?;
        let query = match variant {
            FusionVariant::CrossAttention => swap_concat(m1, m2)?,
            _ => x.clone(),
        };
        let Composition { b, alpha, c } = compose(params, &query, &m_r)?;
        let h = transform(params, &c)?;
        let o = fuse_output(&x, &h)?;
        let pre_mlp = concat(&query, &m_r)?;
        steps.push(StepTrace {
            x,
            z,
            m_r,
            pre_mlp,
            b,
            alpha,
            c,
            h,
            o,
        });
    }

    let zs: Vec<DenseVector> = steps.iter().map(|s| s.z.clone()).collect();
    let hs: Vec<DenseVector> = steps.iter().map(|s| s.h.clone()).collect();
    let memory = write_memory(mem, &zs, &hs)?;
    let outputs = steps.iter().map(|s| s.o.clone()).collect();
    Ok(MbafForward {
        outputs,
        trace: ForwardTrace { variant, s1, s2, steps },
        memory,
    })
}
