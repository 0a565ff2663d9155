use crate::error::Result;
use crate::rng::SplitMix64;

use super::{Dataset, Record, SynthSpec};

// Stream tags for the per-purpose generators. Keeping signals, offsets,
// labels, and noise on independent streams means changing one knob (say
// bias_rho) cannot shift the values another component draws.
const STREAM_EMOTION_SIGNALS: u64 = 1;
const STREAM_SPEAKER_OFFSETS: u64 = 2;
const STREAM_LABELS: u64 = 3;
const STREAM_NOISE: u64 = 4;
const STREAM_PREFERENCE: u64 = 5;

/// Draws a gaussian vector and rescales it to the requested L2 magnitude.
/// A zero magnitude yields the zero vector.
fn scaled_direction(rng: &mut SplitMix64, dim: usize, scale: f64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..dim).map(|_| rng.gaussian()).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in &mut v {
            *x = *x / norm * scale;
        }
    }
    v
}

/// Gram-Schmidt orthonormal basis of `rank` seeded gaussian directions,
/// additionally orthogonal to every vector in `avoid`.
fn orthonormal_basis(
    rng: &mut SplitMix64,
    dim: usize,
    rank: usize,
    avoid: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(rank);
    while basis.len() < rank {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.gaussian()).collect();
        for b in avoid.iter().chain(&basis) {
            let denom: f64 = b.iter().map(|y| y * y).sum();
            if denom == 0.0 {
                continue;
            }
            let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            for (x, y) in v.iter_mut().zip(b) {
                *x -= dot / denom * y;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        // A fresh gaussian draw is never (numerically) inside the span for
        // rank < dim; re-draw rather than divide by a degenerate norm.
        if norm < 1e-9 {
            continue;
        }
        for x in &mut v {
            *x /= norm;
        }
        basis.push(v);
    }
    basis
}

/// Emotion prototypes: mutually orthogonal directions of L2 magnitude
/// `emotion_scale`. Orthogonality makes every class pair equally separable,
/// so dataset difficulty does not swing with the luck of the draw.
pub(crate) fn emotion_prototypes(spec: &SynthSpec, rng: &mut SplitMix64) -> Vec<Vec<f64>> {
    orthonormal_basis(rng, spec.feature_dim, spec.n_emotions, &[])
        .into_iter()
        .map(|mut v| {
            for x in &mut v {
                *x *= spec.emotion_scale;
            }
            v
        })
        .collect()
}

/// Per-speaker offsets: independent directions by default, or coordinates in
/// one shared orthonormal `rank`-basis when `speaker_space_rank` is set. The
/// shared basis is drawn orthogonal to the emotion prototypes, so speaker
/// variation and emotion content occupy disjoint subspaces. The L2 magnitude
/// is `speaker_scale` either way.
pub(crate) fn speaker_offsets(
    spec: &SynthSpec,
    rng: &mut SplitMix64,
    prototypes: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    match spec.speaker_space_rank {
        None => (0..spec.n_speakers)
            .map(|_| scaled_direction(rng, spec.feature_dim, spec.speaker_scale))
            .collect(),
        Some(rank) => {
            let basis = orthonormal_basis(rng, spec.feature_dim, rank, prototypes);
            (0..spec.n_speakers)
                .map(|_| {
                    let coords = scaled_direction(rng, rank, spec.speaker_scale);
                    let mut offset = vec![0.0; spec.feature_dim];
                    for (c, b) in coords.iter().zip(&basis) {
                        for (o, x) in offset.iter_mut().zip(b) {
                            *o += c * x;
                        }
                    }
                    offset
                })
                .collect()
        }
    }
}

/// Generates a dataset from `spec`, deterministically in `spec.seed`.
///
/// Each speaker `s` gets a fixed offset vector of magnitude `speaker_scale`,
/// each emotion `e` a prototype vector of magnitude `emotion_scale`. A sample
/// of speaker `s` draws its emotion label as the speaker's preferred emotion
/// with probability `bias_rho` and uniformly otherwise, then its features as
/// `signal[e] + offset[s] + noise`. The label stream consumes exactly two
/// draws per sample whichever branch is taken, so datasets generated from the
/// same seed differ only where their specs differ.
pub fn generate(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;

    let mut signal_rng = SplitMix64::derive(spec.seed, STREAM_EMOTION_SIGNALS);
    let mut offset_rng = SplitMix64::derive(spec.seed, STREAM_SPEAKER_OFFSETS);
    let mut label_rng = SplitMix64::derive(spec.seed, STREAM_LABELS);
    let mut noise_rng = SplitMix64::derive(spec.seed, STREAM_NOISE);

    let emotion_signals = emotion_prototypes(spec, &mut signal_rng);
    let speaker_offsets = speaker_offsets(spec, &mut offset_rng, &emotion_signals);

    // Preferred-emotion map: speaker s prefers s mod n_emotions, optionally
    // relabeled through a seeded permutation of the emotion classes.
    let mut permutation: Vec<usize> = (0..spec.n_emotions).collect();
    if let Some(pseed) = spec.preference_permutation_seed {
        let mut perm_rng = SplitMix64::derive(pseed, STREAM_PREFERENCE);
        perm_rng.shuffle(&mut permutation);
    }

    let mut records = Vec::with_capacity(spec.n_speakers * spec.samples_per_speaker);
    for speaker in 0..spec.n_speakers {
        let preferred = spec.preferred_emotion(speaker, &permutation);
        for utterance in 0..spec.samples_per_speaker {
            let biased = label_rng.next_f64() < spec.bias_rho;
            let uniform = label_rng.next_below(spec.n_emotions as u64) as usize;
            let emotion = if biased { preferred } else { uniform };

            let features: Vec<f64> = (0..spec.feature_dim)
                .map(|i| {
                    emotion_signals[emotion][i]
                        + speaker_offsets[speaker][i]
                        + spec.noise_std * noise_rng.gaussian()
                })
                .collect();
            records.push(Record {
                id: format!("spk{speaker:03}-utt{utterance:05}"),
                speaker,
                emotion,
                features,
            });
        }
    }

    Ok(Dataset::new(spec.n_speakers, spec.n_emotions, spec.feature_dim, records)?
        .with_source_spec(spec.clone()))
}
