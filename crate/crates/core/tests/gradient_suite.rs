use mbaf_core::fusion::FusionVariant;
use mbaf_core::gradcheck::{check_classifier, check_layer, LayerCheckConfig};
use mbaf_core::ClassifierConfig;

// Any real backward defect shows up at the scale of the gradients themselves
// (1e-3 and up here), far above the finite-difference noise of ~1e-9.
const ABS_TOLERANCE: f64 = 1e-8;

#[test]
fn layer_gradients_agree_across_seeds() {
    for variant in FusionVariant::all_kinds(3) {
        for seed in 0..100 {
            let report = check_layer(&LayerCheckConfig::random(variant, seed), seed).unwrap();
            assert!(
                report.max_abs_error < ABS_TOLERANCE,
                "{variant} seed {seed}: {:?}",
                report.worst_block()
            );
        }
    }
}

#[test]
fn concatenation_meets_relative_threshold() {
    for seed in 0..100 {
        let report = check_layer(&LayerCheckConfig::random(FusionVariant::NaiveFusion, seed), seed).unwrap();
        assert!(report.pass, "seed {seed}: {:?}", report.worst_block());
    }
}

#[test]
fn classifier_gradients_agree() {
    for variant in FusionVariant::all_kinds(3) {
        for (seed, encoder_hidden) in [(0u64, 0usize), (1, 3), (2, 4)] {
            let config = ClassifierConfig {
                encoder_hidden,
                head_hidden: 5,
                classes: 3,
                dropout_rate: 0.3,
                fusion: variant,
                slots: 4,
                batch: 3,
                ..ClassifierConfig::default()
            };
            let report = check_classifier(&config, 3, 2, seed).unwrap();
            assert!(
                report.max_abs_error < ABS_TOLERANCE,
                "{variant} seed {seed}: {:?}",
                report.worst_block()
            );
            if variant == FusionVariant::NaiveFusion {
                assert!(report.pass, "{variant} seed {seed}: {:?}", report.worst_block());
            }
        }
    }
}

#[test]
fn zero_weight_layer_passes_trivially() {
    for variant in FusionVariant::all_kinds(4) {
        let mut config = LayerCheckConfig::new(variant, 3, 2, 4, 2);
        config.zero_weights = true;
        let report = check_layer(&config, 9).unwrap();
        assert!(report.pass, "{variant}: {:?}", report.worst_block());
    }
}
