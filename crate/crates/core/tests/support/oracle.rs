//! Straight-line scalar reference for one memory fusion step.
//!
//! Plain nested `Vec`s and explicit index loops only. Nothing here calls into
//! the library's kernels.

#![allow(dead_code)]

pub struct Weights {
    /// `d × d`, indexed `[input][output]`.
    pub w_r: Vec<Vec<f64>>,
    pub b_r: Vec<f64>,
    /// `2d × d`, indexed `[input][output]`.
    pub w_c: Vec<Vec<f64>>,
    pub b_c: Vec<f64>,
    pub w_scale: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Step {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub m_r: Vec<f64>,
    pub pre_mlp: Vec<f64>,
    pub b: Vec<f64>,
    pub alpha: Vec<f64>,
    pub c: Vec<f64>,
    pub h: Vec<f64>,
    pub o: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Read {
    Naive,
    Cross,
    Mode1,
    Mode2,
}

fn softmax(v: &[f64]) -> Vec<f64> {
    let mut top = v[0];
    for &e in v {
        if e > top {
            top = e;
        }
    }
    let mut out = vec![0.0; v.len()];
    let mut total = 0.0;
    for i in 0..v.len() {
        out[i] = (v[i] - top).exp();
        total += out[i];
    }
    for e in out.iter_mut() {
        *e /= total;
    }
    out
}

fn affine(w: &[Vec<f64>], bias: &[f64], input: &[f64]) -> Vec<f64> {
    let mut out = bias.to_vec();
    for (i, xi) in input.iter().enumerate() {
        for j in 0..out.len() {
            out[j] += w[i][j] * xi;
        }
    }
    out
}

pub fn step(w: &Weights, memory: &[Vec<f64>], m1: &[f64], m2: &[f64], read: Read) -> Step {
    let x: Vec<f64> = match read {
        Read::Mode1 => m1.to_vec(),
        Read::Mode2 => m2.to_vec(),
        _ => m1.iter().chain(m2).copied().collect(),
    };
    let d = x.len();

    let key = affine(&w.w_r, &w.b_r, &x);
    let mut scores = vec![0.0; memory.len()];
    for j in 0..memory.len() {
        for i in 0..d {
            scores[j] += key[i] * memory[j][i];
        }
    }
    let z = softmax(&scores);

    let mut m_r = vec![0.0; d];
    for j in 0..memory.len() {
        for i in 0..d {
            m_r[i] += z[j] * memory[j][i];
        }
    }

    let query: Vec<f64> = match read {
        Read::Cross => m2.iter().chain(m1).copied().collect(),
        _ => x.clone(),
    };
    let pre_mlp: Vec<f64> = query.iter().chain(&m_r).copied().collect();
    let b = affine(&w.w_c, &w.b_c, &pre_mlp);
    let alpha = softmax(&b);
    let mut c = vec![0.0; d];
    let mut h = vec![0.0; d];
    let mut o = vec![0.0; d];
    for i in 0..d {
        c[i] = alpha[i] * b[i];
        let scaled = c[i] * w.w_scale[i];
        h[i] = if scaled > 0.0 { scaled } else { 0.0 };
        o[i] = x[i] + h[i];
    }
    Step {
        x,
        z,
        m_r,
        pre_mlp,
        b,
        alpha,
        c,
        h,
        o,
    }
}

/// One batch: every read sees `memory`, then a single mean-aggregated write.
pub fn batch(
    w: &Weights,
    memory: &[Vec<f64>],
    m1: &[Vec<f64>],
    m2: &[Vec<f64>],
    read: Read,
) -> (Vec<Step>, Vec<Vec<f64>>) {
    let steps: Vec<Step> = m1.iter().zip(m2).map(|(a, b)| step(w, memory, a, b, read)).collect();
    let n = steps.len() as f64;
    let mut next = memory.to_vec();
    for j in 0..memory.len() {
        let mut zbar = 0.0;
        for s in &steps {
            zbar += s.z[j];
        }
        zbar /= n;
        for i in 0..memory[j].len() {
            let mut add = 0.0;
            for s in &steps {
                add += s.z[j] * s.h[i];
            }
            next[j][i] = memory[j][i] * (1.0 - zbar) + add / n;
        }
    }
    (steps, next)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "length mismatch");
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

// Bridging from library types. Only copies data out.

use mbaf_core::fusion::{mbaf_forward, memory_init, FusionVariant, MbafParams, StepTrace};
use mbaf_core::{DenseMatrix, DenseVector, Rng};

pub fn rows_of(m: &DenseMatrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

pub fn weights_of(p: &MbafParams) -> Weights {
    Weights {
        w_r: rows_of(&p.w_r),
        b_r: p.b_r.to_vec(),
        w_c: rows_of(&p.w_c),
        b_c: p.b_c.to_vec(),
        w_scale: p.w_scale.to_vec(),
    }
}

pub fn step_error(lib: &StepTrace, reference: &Step) -> f64 {
    [
        max_abs_diff(&lib.x, &reference.x),
        max_abs_diff(&lib.z, &reference.z),
        max_abs_diff(&lib.m_r, &reference.m_r),
        max_abs_diff(&lib.pre_mlp, &reference.pre_mlp),
        max_abs_diff(&lib.b, &reference.b),
        max_abs_diff(&lib.alpha, &reference.alpha),
        max_abs_diff(&lib.c, &reference.c),
        max_abs_diff(&lib.h, &reference.h),
        max_abs_diff(&lib.o, &reference.o),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

/// Largest deviation between the library forward and the reference over
/// every intermediate and the written memory, for one seeded draw.
pub fn forward_deviation(
    variant: FusionVariant,
    s1: usize,
    s2: usize,
    slots: usize,
    batch_len: usize,
    seed: u64,
) -> f64 {
    let (read, d) = match variant {
        FusionVariant::CrossAttention => (Read::Cross, s1 + s2),
        FusionVariant::SingleMode(1) => (Read::Mode1, s1),
        FusionVariant::SingleMode(_) => (Read::Mode2, s2),
        _ => (Read::Naive, s1 + s2),
    };
    let mut rng = Rng::new(seed);
    let mut params = MbafParams::init(d, &mut rng).unwrap();
    // widen the composer so both ReLU branches are exercised
    params.w_scale.iter_mut().for_each(|w| *w = rng.uniform_in(-2.0, 2.0));
    let memory = memory_init(&mut rng, slots, d).unwrap();
    let draw = |rng: &mut Rng, n: usize| DenseVector::new((0..n).map(|_| rng.next_normal()).collect());
    let m1: Vec<DenseVector> = (0..batch_len).map(|_| draw(&mut rng, s1)).collect();
    let m2: Vec<DenseVector> = (0..batch_len).map(|_| draw(&mut rng, s2)).collect();

    let lib = mbaf_forward(&params, &memory, variant, &m1, &m2).unwrap();
    let plain1: Vec<Vec<f64>> = m1.iter().map(|v| v.to_vec()).collect();
    let plain2: Vec<Vec<f64>> = m2.iter().map(|v| v.to_vec()).collect();
    let (steps, next) = batch(&weights_of(&params), &rows_of(memory.matrix()), &plain1, &plain2, read);

    let mut worst: f64 = 0.0;
    for (a, b) in lib.trace.steps.iter().zip(&steps) {
        worst = worst.max(step_error(a, b));
    }
    for (j, row) in next.iter().enumerate() {
        worst = worst.max(max_abs_diff(lib.memory.row(j), row));
    }
    assert_eq!(lib.trace.steps.len(), steps.len());
    worst
}
