//! A complete fusion stage for any [`FusionVariant`]: the naive baseline,
//! one shared memory layer, two per-mode layers, or a layer plus a learned
//! output projection.

use crate::error::{param_err, shape_err, Result};
use crate::numcore::{concat, DenseMatrix, DenseVector, Rng};
use crate::params::{join, ParamSet, TensorVisitor};

use super::backward::mbaf_backward;
use super::layer::{batch_dims, mbaf_forward, naive_fusion, resample_output, ForwardTrace};
use super::memory::{memory_init, MemoryState};
use super::params::{MbafGrads, MbafParams};
use super::variant::FusionVariant;

#[derive(Debug, Clone, PartialEq)]
pub struct FusionParams {
    pub variant: FusionVariant,
    pub s1: usize,
    pub s2: usize,
    /// Empty for naive fusion, two entries (mode 1, mode 2) for single-mode,
    /// one otherwise.
    pub units: Vec<MbafParams>,
    /// `d × d_out` projection of the resampled variant.
    pub proj: Option<DenseMatrix>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionGrads {
    pub units: Vec<MbafGrads>,
    pub proj: Option<DenseMatrix>,
}

/// Input dimension and per-unit layer variant for each memory layer.
fn unit_layout(variant: FusionVariant, s1: usize, s2: usize) -> Vec<(usize, FusionVariant)> {
    match variant {
        FusionVariant::NaiveFusion => vec![],
        FusionVariant::SingleMode(_) => vec![(s1, FusionVariant::SingleMode(1)), (s2, FusionVariant::SingleMode(2))],
        v => vec![(s1 + s2, v)],
    }
}

impl FusionParams {
    pub fn init(variant: FusionVariant, s1: usize, s2: usize, rng: &mut Rng) -> Result<Self> {
        variant.validate()?;
        if s1 == 0 || s2 == 0 {
            return Err(param_err(format!("modality dims must be >= 1, got ({s1}, {s2})")));
        }
        let units = unit_layout(variant, s1, s2)
            .into_iter()
            .map(|(dim, _)| MbafParams::init(dim, rng))
            .collect::<Result<Vec<_>>>()?;
        let proj = match variant {
            FusionVariant::Resampled(d_out) => {
                let d = s1 + s2;
                let bound = 1.0 / (d as f64).sqrt();
                let data = (0..d * d_out).map(|_| rng.uniform_in(-bound, bound)).collect();
                Some(DenseMatrix::new(d, d_out, data)?)
            }
            _ => None,
        };
        Ok(Self {
            variant,
            s1,
            s2,
            units,
            proj,
        })
    }

    pub fn output_dim(&self) -> usize {
        match (&self.variant, &self.proj) {
            (FusionVariant::Resampled(d_out), _) => *d_out,
            _ => self.s1 + self.s2,
        }
    }

    /// One fresh memory per unit.
    pub fn init_memory(&self, slots: usize, rng: &mut Rng) -> Result<Vec<MemoryState>> {
        self.units.iter().map(|u| memory_init(rng, slots, u.dim())).collect()
    }

    pub fn zero_grads(&self) -> FusionGrads {
        FusionGrads {
            units: self.units.iter().map(|u| MbafGrads::zeros(u.dim())).collect(),
            proj: self.proj.as_ref().map(|p| DenseMatrix::zeros(p.rows(), p.cols())),
        }
    }
}

impl ParamSet for FusionParams {
    fn visit(&self, prefix: &str, f: &mut TensorVisitor<'_>) {
        for (i, u) in self.units.iter().enumerate() {
            u.visit(&join(prefix, &format!("unit{i}")), f);
        }
        if let Some(p) = &self.proj {
            f(&join(prefix, "proj"), p.shape(), p.data());
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [f64])) {
        for (i, u) in self.units.iter_mut().enumerate() {
            u.visit_mut(&join(prefix, &format!("unit{i}")), f);
        }
        if let Some(p) = &mut self.proj {
            f(&join(prefix, "proj"), p.data_mut());
        }
    }
}

impl ParamSet for FusionGrads {
    fn visit(&self, prefix: &str, f: &mut TensorVisitor<'_>) {
        for (i, u) in self.units.iter().enumerate() {
            u.visit(&join(prefix, &format!("unit{i}")), f);
        }
        if let Some(p) = &self.proj {
            f(&join(prefix, "proj"), p.shape(), p.data());
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [f64])) {
        for (i, u) in self.units.iter_mut().enumerate() {
            u.visit_mut(&join(prefix, &format!("unit{i}")), f);
        }
        if let Some(p) = &mut self.proj {
            f(&join(prefix, "proj"), p.data_mut());
        }
    }
}

#[derive(Debug, Clone)]
pub struct FusionForward {
    pub outputs: Vec<DenseVector>,
    pub traces: Vec<ForwardTrace>,
    /// Layer outputs before projection (resampled variant only).
    pub pre_proj: Vec<DenseVector>,
    /// Memory after this batch's write, one per unit.
    pub memory: Vec<MemoryState>,
}

pub fn fusion_forward(
    params: &FusionParams,
    memory: &[MemoryState],
    batch_m1: &[DenseVector],
    batch_m2: &[DenseVector],
) -> Result<FusionForward> {
    let (s1, s2) = batch_dims(batch_m1, batch_m2)?;
    if (s1, s2) != (params.s1, params.s2) {
        return Err(shape_err(
            "fusion_forward",
            format!("({}, {})", params.s1, params.s2),
            format!("({s1}, {s2})"),
        ));
    }
    if memory.len() != params.units.len() {
        return Err(shape_err("fusion_forward (memories)", params.units.len(), memory.len()));
    }
    let layout = unit_layout(params.variant, s1, s2);
    match params.variant {
        FusionVariant::NaiveFusion => Ok(FusionForward {
            outputs: naive_fusion(batch_m1, batch_m2)?,
            traces: vec![],
            pre_proj: vec![],
            memory: vec![],
        }),
        FusionVariant::SingleMode(_) => {
            let a = mbaf_forward(&params.units[0], &memory[0], layout[0].1, batch_m1, batch_m2)?;
            let b = mbaf_forward(&params.units[1], &memory[1], layout[1].1, batch_m1, batch_m2)?;
            let outputs = a
                .outputs
                .iter()
                .zip(&b.outputs)
                .map(|(x, y)| concat(x, y))
                .collect::<Result<Vec<_>>>()?;
            Ok(FusionForward {
                outputs,
                traces: vec![a.trace, b.trace],
                pre_proj: vec![],
                memory: vec![a.memory, b.memory],
            })
        }
        v => {
            let fwd = mbaf_forward(&params.units[0], &memory[0], v, batch_m1, batch_m2)?;
            let (outputs, pre_proj) = match &params.proj {
                Some(proj) => (
                    fwd.outputs
                        .iter()
                        .map(|o| resample_output(o, proj))
                        .collect::<Result<Vec<_>>>()?,
                    fwd.outputs,
                ),
                None => (fwd.outputs, vec![]),
            };
            Ok(FusionForward {
                outputs,
                traces: vec![fwd.trace],
                pre_proj,
                memory: vec![fwd.memory],
            })
        }
    }
}

#[derive(Debug, Clone)]
pub struct FusionBackward {
    pub grads: FusionGrads,
    pub grad_m1: Vec<DenseVector>,
    pub grad_m2: Vec<DenseVector>,
}

pub fn fusion_backward(
    params: &FusionParams,
    fwd: &FusionForward,
    memory_prev: &[MemoryState],
    grad_out: &[DenseVector],
) -> Result<FusionBackward> {
    if grad_out.len() != fwd.outputs.len() {
        return Err(shape_err("fusion_backward (batch)", fwd.outputs.len(), grad_out.len()));
    }
    let out_dim = params.output_dim();
    if let Some(g) = grad_out.iter().find(|g| g.len() != out_dim) {
        return Err(shape_err("fusion_backward", out_dim, g.len()));
    }
    let s1 = params.s1;
    let mut grads = params.zero_grads();
    match params.variant {
        FusionVariant::NaiveFusion => Ok(FusionBackward {
            grads,
            grad_m1: grad_out.iter().map(|g| DenseVector::from(&g[..s1])).collect(),
            grad_m2: grad_out.iter().map(|g| DenseVector::from(&g[s1..])).collect(),
        }),
        FusionVariant::SingleMode(_) => {
            let g_first: Vec<DenseVector> = grad_out.iter().map(|g| DenseVector::from(&g[..s1])).collect();
            let g_second: Vec<DenseVector> = grad_out.iter().map(|g| DenseVector::from(&g[s1..])).collect();
            let a = mbaf_backward(&params.units[0], &fwd.traces[0], &memory_prev[0], &g_first)?;
            let b = mbaf_backward(&params.units[1], &fwd.traces[1], &memory_prev[1], &g_second)?;
            grads.units = vec![a.grads, b.grads];
            Ok(FusionBackward {
                grads,
                grad_m1: a.grad_m1,
                grad_m2: b.grad_m2,
            })
        }
        _ => {
            let g_layer: Vec<DenseVector> = match &params.proj {
                Some(proj) => {
                    let gp = grads.proj.as_mut().expect("projection gradient");
                    grad_out
                        .iter()
                        .zip(&fwd.pre_proj)
                        .map(|(g, o)| {
                            gp.add_outer(o, g, 1.0);
                            proj.matvec(g)
                        })
                        .collect::<Result<Vec<_>>>()?
                }
                None => grad_out.to_vec(),
            };
            let back = mbaf_backward(&params.units[0], &fwd.traces[0], &memory_prev[0], &g_layer)?;
            grads.units = vec![back.grads];
            Ok(FusionBackward {
                grads,
                grad_m1: back.grad_m1,
                grad_m2: back.grad_m2,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn batch(rng: &mut Rng, n: usize, dim: usize) -> Vec<DenseVector> {
        (0..n)
            .map(|_| DenseVector::new((0..dim).map(|_| rng.next_normal()).collect()))
            .collect()
    }

    #[test]
    fn output_dims_per_variant() {
        let mut rng = Rng::new(1);
        let m1 = batch(&mut rng, 3, 2);
        let m2 = batch(&mut rng, 3, 5);
        for v in FusionVariant::all_kinds(11) {
            let p = FusionParams::init(v, 2, 5, &mut rng).unwrap();
            let mem = p.init_memory(4, &mut rng).unwrap();
            let fwd = fusion_forward(&p, &mem, &m1, &m2).unwrap();
            let expected = if let FusionVariant::Resampled(d) = v { d } else { 7 };
            assert_eq!(p.output_dim(), expected);
            assert!(fwd.outputs.iter().all(|o| o.len() == expected), "{v}");
        }
    }

    #[test]
    fn naive_backward_is_slicing() {
        let mut rng = Rng::new(2);
        let p = FusionParams::init(FusionVariant::NaiveFusion, 2, 1, &mut rng).unwrap();
        let m1 = batch(&mut rng, 1, 2);
        let m2 = batch(&mut rng, 1, 1);
        let fwd = fusion_forward(&p, &[], &m1, &m2).unwrap();
        let g = DenseVector::new(vec![1.0, 2.0, 3.0]);
        let back = fusion_backward(&p, &fwd, &[], &[g]).unwrap();
        assert_eq!(back.grad_m1[0].as_slice(), &[1.0, 2.0]);
        assert_eq!(back.grad_m2[0].as_slice(), &[3.0]);
        assert_eq!(back.grads.num_params(), 0);
    }

    #[test]
    fn single_mode_holds_two_memories() {
        let mut rng = Rng::new(3);
        let p = FusionParams::init(FusionVariant::SingleMode(2), 3, 4, &mut rng).unwrap();
        let mem = p.init_memory(5, &mut rng).unwrap();
        assert_eq!(mem.len(), 2);
        assert_eq!((mem[0].dim(), mem[1].dim()), (3, 4));
        assert!(fusion_forward(&p, &mem[..1], &batch(&mut rng, 1, 3), &batch(&mut rng, 1, 4)).is_err());
    }
}
