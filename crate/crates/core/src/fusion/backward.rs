use crate::error::{shape_err, Result};
use crate::numcore::{softmax_vjp, DenseVector};

use super::layer::ForwardTrace;
use super::memory::MemoryState;
use super::params::{MbafGrads, MbafParams};
use super::variant::FusionVariant;

/// Gradients of one forward call.
#[derive(Debug, Clone)]
pub struct MbafBackward {
    pub grads: MbafGrads,
    pub grad_m1: Vec<DenseVector>,
    pub grad_m2: Vec<DenseVector>,
}

/// Exact vector-Jacobian product of [`super::mbaf_forward`].
///
/// `mem_prev` is the memory the forward call read from; it is treated as a
/// constant, so no gradient flows into earlier batches through the write.
pub fn mbaf_backward(
    params: &MbafParams,
    trace: &ForwardTrace,
    mem_prev: &MemoryState,
    batch_grad_o: &[DenseVector],
) -> Result<MbafBackward> {
    let d = params.dim();
    if batch_grad_o.len() != trace.steps.len() {
        return Err(shape_err(
            "mbaf_backward (batch)",
            trace.steps.len(),
            batch_grad_o.len(),
        ));
    }
    if mem_prev.dim() != d {
        return Err(shape_err("mbaf_backward (memory dim)", d, mem_prev.dim()));
    }
    let (s1, s2) = (trace.s1, trace.s2);
    let mut grads = MbafGrads::zeros(d);
    let mut grad_m1 = Vec::with_capacity(trace.steps.len());
    let mut grad_m2 = Vec::with_capacity(trace.steps.len());

    for (step, g_o) in trace.steps.iter().zip(batch_grad_o) {
        if g_o.len() != d || step.x.len() != d || step.z.len() != mem_prev.slots() {
            return Err(shape_err("mbaf_backward (step)", d, g_o.len()));
        }
        // o = x + h
        let mut g_x = g_o.clone();

        // h = relu(c ∘ w)
        let mut g_pre = DenseVector::zeros(d);
        for i in 0..d {
            if step.c[i] * params.w_scale[i] > 0.0 {
                g_pre[i] = g_o[i];
            }
        }
        let mut g_c = DenseVector::zeros(d);
        for i in 0..d {
            g_c[i] = g_pre[i] * params.w_scale[i];
            grads.w_scale[i] += g_pre[i] * step.c[i];
        }

        // c = α ∘ b, α = softmax(b)
        let g_alpha: Vec<f64> = g_c.iter().zip(step.b.iter()).map(|(g, b)| g * b).collect();
        let mut g_b = softmax_vjp(&step.alpha, &g_alpha);
        for i in 0..d {
            g_b[i] += g_c[i] * step.alpha[i];
        }

        // b = W_cᵀ(q ⊕ m_r) + b_c
        grads.w_c.add_outer(&step.pre_mlp, &g_b, 1.0);
        grads.b_c.add_assign(&g_b);
        let g_u = params.w_c.matvec(&g_b)?;
        let (g_query, g_mr) = g_u.split_at(d);

        // m_r = Σ_j z_j M[j]
        let g_z = mem_prev.matrix().matvec(g_mr)?;

        // z = softmax(<W_rᵀx + b_r, M[j]>)
        let g_scores = softmax_vjp(&step.z, &g_z);
        let g_key = mem_prev.matrix().tmatvec(&g_scores)?;
        grads.w_r.add_outer(&step.x, &g_key, 1.0);
        grads.b_r.add_assign(&g_key);
        g_x.add_assign(&params.w_r.matvec(&g_key)?);

        let mut g1 = DenseVector::zeros(s1);
        let mut g2 = DenseVector::zeros(s2);
        match trace.variant {
            FusionVariant::SingleMode(1) => {
                g1.add_assign(&g_x);
                g1.add_assign(g_query);
            }
            FusionVariant::SingleMode(_) => {
                g2.add_assign(&g_x);
                g2.add_assign(g_query);
            }
            FusionVariant::CrossAttention => {
                g1.add_assign(&g_x[..s1]);
                g2.add_assign(&g_x[s1..]);
                // query was m2 ⊕ m1
                g2.add_assign(&g_query[..s2]);
                g1.add_assign(&g_query[s2..]);
            }
            _ => {
                g_x.add_assign(g_query);
                g1.add_assign(&g_x[..s1]);
                g2.add_assign(&g_x[s1..]);
            }
        }
        grad_m1.push(g1);
        grad_m2.push(g2);
    }

    Ok(MbafBackward {
        grads,
        grad_m1,
        grad_m2,
    })
}
