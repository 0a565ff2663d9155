//! Cross-module flows at full benchmark scale: persistence round-trips and
//! whole-protocol determinism.

use featnorm_core::eval::{cross_validate, EvalProtocol};
use featnorm_core::synth::{generate, load_csv, save_csv, SynthSpec};
use featnorm_core::train::{AssemblyPlan, Strategy, TrainConfig};

#[test]
fn benchmark_dataset_survives_a_csv_round_trip_exactly() {
    let data = generate(&SynthSpec::benchmark(123)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bench.csv");
    save_csv(&data, &path).unwrap();
    let restored = load_csv(&path).unwrap();
    assert_eq!(data.len(), restored.len());
    for (a, b) in data.records().iter().zip(restored.records()) {
        assert_eq!(a, b, "record {} changed across the round trip", a.id);
    }
    assert_eq!(
        data.source_spec(),
        restored.source_spec(),
        "the sidecar must echo the full generator spec"
    );
}

#[test]
fn cross_validation_is_deterministic_end_to_end() {
    let spec = SynthSpec {
        n_speakers: 6,
        samples_per_speaker: 60,
        feature_dim: 12,
        speaker_space_rank: Some(2),
        ..SynthSpec::benchmark(77)
    };
    let data = generate(&spec).unwrap();
    let plan = AssemblyPlan {
        upstream_dims: vec![12, 8],
        ..AssemblyPlan::new(spec.feature_dim, spec.n_emotions, spec.n_speakers, Strategy::Tap)
    };
    let config = TrainConfig {
        epochs: 6,
        lambda: 0.005,
        ..TrainConfig::new(Strategy::Tap, 77)
    };
    let protocol = EvalProtocol {
        k_folds: 3,
        ..EvalProtocol::default()
    };

    let serial = cross_validate(&data, None, &plan, &config, &protocol, 1).unwrap();
    let parallel = cross_validate(&data, None, &plan, &config, &protocol, 4).unwrap();
    let again = cross_validate(&data, None, &plan, &config, &protocol, 1).unwrap();
    assert_eq!(serial, again, "same inputs must reproduce the same report");
    assert_eq!(serial, parallel, "parallelism must not leak into results");
}
