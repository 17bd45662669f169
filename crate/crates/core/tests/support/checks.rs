//! Seeded invariant cases for the memory write and the layer shape contract.
//! Each returns `Err` with a description of the first violation.

#![allow(dead_code)]

use mbaf_core::fusion::{
    fusion_forward, mbaf_forward, memory_init, naive_fusion, write_memory, FusionParams, FusionVariant, MbafParams,
    MemoryState,
};
use mbaf_core::numcore::softmax;
use mbaf_core::{DenseVector, Rng};

fn normal_vec(rng: &mut Rng, n: usize) -> DenseVector {
    DenseVector::new((0..n).map(|_| rng.next_normal()).collect())
}

fn random_key(rng: &mut Rng, k: usize) -> DenseVector {
    let logits: Vec<f64> = (0..k).map(|_| 3.0 * rng.next_normal()).collect();
    softmax(&logits).unwrap()
}

/// Batch of one with a one-hot key: row `r` becomes `h`, every other row keeps its bits.
pub fn one_hot_write(seed: u64) -> Result<(), String> {
    let mut rng = Rng::new(seed);
    let (k, d) = (1 + rng.below(8), 1 + rng.below(8));
    let mem = memory_init(&mut rng, k, d).unwrap();
    let r = rng.below(k);
    let mut z = DenseVector::zeros(k);
    z[r] = 1.0;
    let h = normal_vec(&mut rng, d);
    let next = write_memory(&mem, &[z], std::slice::from_ref(&h)).unwrap();
    for j in 0..k {
        let expected = if j == r { h.as_slice() } else { mem.row(j) };
        let got = next.row(j);
        if got.iter().zip(expected).any(|(a, b)| a.to_bits() != b.to_bits()) {
            return Err(format!(
                "seed {seed}: row {j} (hot row {r}) is {got:?}, expected {expected:?}"
            ));
        }
    }
    Ok(())
}

/// Frozen memory survives several full forwards bit for bit.
pub fn disabled_write_identity(seed: u64) -> Result<(), String> {
    let mut rng = Rng::new(seed);
    let (s1, s2, k) = (1 + rng.below(4), 1 + rng.below(4), 1 + rng.below(6));
    let params = MbafParams::init(s1 + s2, &mut rng).unwrap();
    let mut mem = memory_init(&mut rng, k, s1 + s2).unwrap();
    mem.writes_enabled = false;
    let before = mem.clone();
    for _ in 0..3 {
        let batch = 1 + rng.below(4);
        let m1: Vec<_> = (0..batch).map(|_| normal_vec(&mut rng, s1)).collect();
        let m2: Vec<_> = (0..batch).map(|_| normal_vec(&mut rng, s2)).collect();
        mem = mbaf_forward(&params, &mem, FusionVariant::NaiveAttention, &m1, &m2)
            .unwrap()
            .memory;
    }
    let same = before
        .matrix()
        .data()
        .iter()
        .zip(mem.matrix().data())
        .all(|(a, b)| a.to_bits() == b.to_bits());
    if same {
        Ok(())
    } else {
        Err(format!("seed {seed}: frozen memory changed"))
    }
}

/// Each row moves toward a convex combination of the batch values by its mean key weight.
pub fn convex_row_blend(seed: u64) -> Result<(), String> {
    let mut rng = Rng::new(seed);
    let (k, d, batch) = (1 + rng.below(8), 1 + rng.below(8), 1 + rng.below(5));
    let mem = memory_init(&mut rng, k, d).unwrap();
    let zs: Vec<_> = (0..batch).map(|_| random_key(&mut rng, k)).collect();
    let hs: Vec<_> = (0..batch).map(|_| normal_vec(&mut rng, d)).collect();
    let next = write_memory(&mem, &zs, &hs).unwrap();
    let n = batch as f64;
    for j in 0..k {
        let lambda: f64 = zs.iter().map(|z| z[j]).sum::<f64>() / n;
        if !(0.0..=1.0).contains(&lambda) {
            return Err(format!("seed {seed}: blend weight {lambda} outside [0,1]"));
        }
        for i in 0..d {
            let lo = hs.iter().map(|h| h[i]).fold(mem.row(j)[i], f64::min);
            let hi = hs.iter().map(|h| h[i]).fold(mem.row(j)[i], f64::max);
            let got = next.row(j)[i];
            if got < lo - 1e-12 || got > hi + 1e-12 {
                return Err(format!("seed {seed}: M[{j}][{i}] = {got} outside hull [{lo}, {hi}]"));
            }
            let add: f64 = zs.iter().zip(&hs).map(|(z, h)| z[j] * h[i]).sum::<f64>() / n;
            let expected = mem.row(j)[i] * (1.0 - lambda) + add;
            if (got - expected).abs() > 1e-12 {
                return Err(format!(
                    "seed {seed}: M[{j}][{i}] = {got}, per-row blend gives {expected}"
                ));
            }
        }
    }
    Ok(())
}

/// Reversing and rotating the batch keeps the written memory (to summation
/// rounding) and the multiset of outputs (exactly).
pub fn batch_order_invariance(seed: u64) -> Result<(), String> {
    let mut rng = Rng::new(seed);
    let (s1, s2, k, batch) = (1 + rng.below(4), 1 + rng.below(4), 1 + rng.below(6), 2 + rng.below(3));
    let variant = if rng.below(2) == 0 {
        FusionVariant::NaiveAttention
    } else {
        FusionVariant::CrossAttention
    };
    let params = MbafParams::init(s1 + s2, &mut rng).unwrap();
    let mem = memory_init(&mut rng, k, s1 + s2).unwrap();
    let m1: Vec<_> = (0..batch).map(|_| normal_vec(&mut rng, s1)).collect();
    let m2: Vec<_> = (0..batch).map(|_| normal_vec(&mut rng, s2)).collect();
    let base = mbaf_forward(&params, &mem, variant, &m1, &m2).unwrap();

    let shift = 1 + rng.below(batch - 1);
    let order: Vec<usize> = (0..batch).rev().cycle().skip(shift).take(batch).collect();
    let p1: Vec<_> = order.iter().map(|&i| m1[i].clone()).collect();
    let p2: Vec<_> = order.iter().map(|&i| m2[i].clone()).collect();
    let permuted = mbaf_forward(&params, &mem, variant, &p1, &p2).unwrap();

    for (slot, &src) in order.iter().enumerate() {
        if permuted.outputs[slot] != base.outputs[src] {
            return Err(format!(
                "seed {seed}: output for example {src} changed under permutation"
            ));
        }
    }
    let drift = base
        .memory
        .matrix()
        .data()
        .iter()
        .zip(permuted.memory.matrix().data())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if drift > 1e-12 {
        return Err(format!(
            "seed {seed}: written memory differs by {drift:e} under permutation"
        ));
    }
    Ok(())
}

pub fn memory_write_case(seed: u64) -> Result<(), String> {
    one_hot_write(seed)?;
    disabled_write_identity(seed)?;
    convex_row_blend(seed)?;
    batch_order_invariance(seed)
}

/// Output width of every non-resampled variant equals plain concatenation.
pub fn shape_contract(seed: u64) -> Result<(), String> {
    let mut rng = Rng::new(seed);
    let (s1, s2) = (1 + rng.below(24), 1 + rng.below(24));
    let slots = 1 + rng.below(8);
    let batch = 1 + rng.below(3);
    let m1: Vec<_> = (0..batch).map(|_| normal_vec(&mut rng, s1)).collect();
    let m2: Vec<_> = (0..batch).map(|_| normal_vec(&mut rng, s2)).collect();
    let concat_dim = naive_fusion(&m1, &m2).unwrap()[0].len();
    if concat_dim != s1 + s2 {
        return Err(format!("seed {seed}: concatenation width {concat_dim} != {}", s1 + s2));
    }
    for variant in [
        FusionVariant::NaiveAttention,
        FusionVariant::CrossAttention,
        FusionVariant::SingleMode(1),
        FusionVariant::SingleMode(2),
    ] {
        let params = FusionParams::init(variant, s1, s2, &mut rng).unwrap();
        let memory: Vec<MemoryState> = params.init_memory(slots, &mut rng).unwrap();
        let fwd = fusion_forward(&params, &memory, &m1, &m2).unwrap();
        if let Some(bad) = fwd.outputs.iter().find(|o| o.len() != concat_dim) {
            return Err(format!(
                "seed {seed}: {variant} emitted width {} for ({s1},{s2})",
                bad.len()
            ));
        }
        if let FusionVariant::SingleMode(mode) = variant {
            let unit = &fwd.traces[usize::from(mode) - 1];
            let expected = if mode == 1 { s1 } else { s2 };
            if unit.steps.iter().any(|s| s.o.len() != expected) {
                return Err(format!("seed {seed}: mode {mode} unit width != {expected}"));
            }
        }
    }
    Ok(())
}
