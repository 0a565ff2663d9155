//! As the normalization strength shrinks toward zero, the adversarially
//! trained parameters must approach the plain baseline's — exactly equal at
//! zero, and monotonically closer as the strength drops.

use featnorm_core::synth::{generate, split_speaker_dependent, SynthSpec};
use featnorm_core::train::{train, AssemblyPlan, ModelAssembly, Strategy, TrainConfig};
use featnorm_core::Mlp64;

fn trained_assembly(strategy: Strategy, lambda: f64, seed: u64) -> ModelAssembly {
    let spec = SynthSpec {
        n_speakers: 6,
        feature_dim: 12,
        samples_per_speaker: 40,
        speaker_space_rank: Some(2),
        ..SynthSpec::benchmark(seed)
    };
    let data = generate(&spec).unwrap();
    let split = split_speaker_dependent(&data, (0.8, 0.1, 0.1), seed).unwrap();
    let plan = AssemblyPlan {
        upstream_dims: vec![10, 8],
        ..AssemblyPlan::new(spec.feature_dim, spec.n_emotions, spec.n_speakers, strategy)
    };
    let mut model = plan.build(seed).unwrap();
    let config = TrainConfig {
        lambda,
        epochs: 8,
        ..TrainConfig::new(strategy, seed)
    };
    train(&mut model, &data, &split, &data, &config).unwrap();
    model
}

fn max_param_diff(a: &Mlp64, b: &Mlp64) -> f64 {
    assert_eq!(a.param_count(), b.param_count());
    (0..a.param_count())
        .map(|i| (a.param(i).unwrap() - b.param(i).unwrap()).abs())
        .fold(0.0, f64::max)
}

/// Largest parameter gap across the components the emotion path shares with
/// the baseline (the speaker head is trained in both and never feeds back).
fn shared_path_diff(a: &ModelAssembly, b: &ModelAssembly) -> f64 {
    max_param_diff(a.upstream(), b.upstream())
        .max(max_param_diff(a.emotion_head(), b.emotion_head()))
}

#[test]
fn tap_converges_to_baseline_as_lambda_vanishes() {
    let seed = 11;
    let baseline = trained_assembly(Strategy::Baseline, 0.0, seed);
    let exact = trained_assembly(Strategy::Tap, 0.0, seed);
    let tiny = trained_assembly(Strategy::Tap, 1e-6, seed);
    let small = trained_assembly(Strategy::Tap, 1e-4, seed);
    let moderate = trained_assembly(Strategy::Tap, 1e-2, seed);

    assert_eq!(
        shared_path_diff(&exact, &baseline),
        0.0,
        "lambda = 0 must reproduce the baseline bit-for-bit"
    );

    let d_tiny = shared_path_diff(&tiny, &baseline);
    let d_small = shared_path_diff(&small, &baseline);
    let d_moderate = shared_path_diff(&moderate, &baseline);
    assert!(d_tiny > 0.0, "any positive lambda must move the upstream");
    assert!(
        d_tiny < d_small && d_small < d_moderate,
        "distance to baseline should grow with lambda: {d_tiny} vs {d_small} vs {d_moderate}"
    );
    // Continuity, not just ordering: a six-order-of-magnitude drop in lambda
    // should leave only a sliver of the moderate run's displacement.
    assert!(
        d_tiny < d_moderate * 1e-2,
        "lambda 1e-6 sits too far from the baseline: {d_tiny} vs {d_moderate}"
    );
}
