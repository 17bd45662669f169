mod support;

use mbaf_core::fusion::{fusion_forward, FusionParams, FusionVariant};
use mbaf_core::{DenseVector, Rng};
use support::oracle::{self, forward_deviation};

#[test]
fn two_by_two_three_slots_matches_reference() {
    for variant in [FusionVariant::NaiveAttention, FusionVariant::CrossAttention] {
        for seed in 0..50 {
            let err = forward_deviation(variant, 2, 2, 3, 2, seed);
            assert!(err <= 1e-12, "{variant} seed {seed}: {err:e}");
        }
    }
}

#[test]
fn random_small_shapes_match_reference() {
    let mut rng = Rng::new(2024);
    let variants = [
        FusionVariant::NaiveAttention,
        FusionVariant::CrossAttention,
        FusionVariant::SingleMode(1),
        FusionVariant::SingleMode(2),
    ];
    for seed in 0..200 {
        let s1 = 1 + rng.below(4);
        let s2 = 1 + rng.below(4);
        let slots = 1 + rng.below(5);
        let batch = 1 + rng.below(4);
        let variant = variants[seed as usize % variants.len()];
        let err = forward_deviation(variant, s1, s2, slots, batch, seed);
        assert!(
            err <= 1e-12,
            "{variant} ({s1},{s2},{slots},{batch}) seed {seed}: {err:e}"
        );
    }
}

#[test]
fn resampled_block_projects_the_naive_attention_output() {
    let mut rng = Rng::new(5);
    let params = FusionParams::init(FusionVariant::Resampled(5), 3, 2, &mut rng).unwrap();
    let memory = params.init_memory(4, &mut rng).unwrap();
    let m1: Vec<DenseVector> = (0..3)
        .map(|_| DenseVector::new((0..3).map(|_| rng.next_normal()).collect()))
        .collect();
    let m2: Vec<DenseVector> = (0..3)
        .map(|_| DenseVector::new((0..2).map(|_| rng.next_normal()).collect()))
        .collect();
    let fwd = fusion_forward(&params, &memory, &m1, &m2).unwrap();

    let w = oracle::weights_of(&params.units[0]);
    let plain1: Vec<Vec<f64>> = m1.iter().map(|v| v.to_vec()).collect();
    let plain2: Vec<Vec<f64>> = m2.iter().map(|v| v.to_vec()).collect();
    let (steps, _) = oracle::batch(
        &w,
        &oracle::rows_of(memory[0].matrix()),
        &plain1,
        &plain2,
        oracle::Read::Naive,
    );
    let proj = oracle::rows_of(params.proj.as_ref().unwrap());
    for (out, step) in fwd.outputs.iter().zip(&steps) {
        assert_eq!(out.len(), 5);
        for col in 0..5 {
            let expected: f64 = (0..5).map(|row| proj[row][col] * step.o[row]).sum();
            assert!((out[col] - expected).abs() <= 1e-12);
        }
    }
}
