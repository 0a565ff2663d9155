//! Synthetic datasets with planted speaker structure and a controllable
//! spurious speaker-emotion correlation, plus the split machinery for the
//! evaluation protocols.

mod csv;
mod generate;
mod split;

pub use csv::{load_csv, save_csv};
pub use generate::generate;
pub use split::{
    split_speaker_dependent, split_speaker_independent, subsample_indices_per_class,
    subsample_per_class, FoldSplit, SplitMode,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::Matrix64;

/// Generator parameters for a synthetic dataset.
///
/// Every sample's features are `emotion_signal[e] + speaker_offset[s] +
/// gaussian(0, noise_std)`; `bias_rho` is the probability that a sample's
/// emotion label is its speaker's preferred one rather than uniform, which is
/// the knob that plants the spurious speaker-emotion correlation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_speakers: usize,
    pub n_emotions: usize,
    pub feature_dim: usize,
    /// L2 magnitude of each per-speaker offset vector.
    pub speaker_scale: f64,
    /// L2 magnitude of each per-emotion signal vector.
    pub emotion_scale: f64,
    pub noise_std: f64,
    /// Probability that a sample's emotion is its speaker's preferred one.
    pub bias_rho: f64,
    pub samples_per_speaker: usize,
    pub seed: u64,
    /// When set, the preferred-emotion map (speaker `s` prefers emotion
    /// `s mod n_emotions`) is composed with a seeded permutation of the
    /// emotion classes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preference_permutation_seed: Option<u64>,
    /// When set, all speaker offsets are drawn inside one shared
    /// `rank`-dimensional subspace orthogonal to the emotion prototypes
    /// (speaker variation as a few common latent factors, disjoint from
    /// emotion content); unset, every offset gets its own independent
    /// direction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speaker_space_rank: Option<usize>,
}

impl SynthSpec {
    /// The default desk-scale benchmark: mirrors a 10-speaker, 4-class corpus
    /// shape with a strong planted speaker-emotion bias. Speaker offsets share
    /// a rank-3 subspace (a few common vocal-tract-like factors), which makes
    /// speaker variation on held-out speakers predictable from training
    /// speakers — the regime where normalizing it can pay off.
    pub fn benchmark(seed: u64) -> Self {
        SynthSpec {
            n_speakers: 10,
            n_emotions: 4,
            feature_dim: 32,
            speaker_scale: 3.0,
            emotion_scale: 2.0,
            noise_std: 1.0,
            bias_rho: 0.9,
            samples_per_speaker: 200,
            seed,
            preference_permutation_seed: None,
            speaker_space_rank: Some(3),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_speakers < 2 {
            return Err(Error::invalid("n_speakers must be at least 2"));
        }
        if self.n_emotions < 2 {
            return Err(Error::invalid("n_emotions must be at least 2"));
        }
        if self.feature_dim == 0 {
            return Err(Error::invalid("feature_dim must be positive"));
        }
        if self.n_emotions > self.feature_dim {
            return Err(Error::invalid(format!(
                "feature_dim must be at least n_emotions to fit orthogonal emotion \
                 prototypes: {} < {}",
                self.feature_dim, self.n_emotions
            )));
        }
        if !(0.0..=1.0).contains(&self.bias_rho) {
            return Err(Error::invalid(format!(
                "bias_rho must lie in [0, 1], got {}",
                self.bias_rho
            )));
        }
        for (name, value) in [
            ("speaker_scale", self.speaker_scale),
            ("emotion_scale", self.emotion_scale),
            ("noise_std", self.noise_std),
        ] {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(Error::invalid(format!(
                    "{name} must be finite and non-negative, got {value}"
                )));
            }
        }
        if self.samples_per_speaker == 0 {
            return Err(Error::invalid("samples_per_speaker must be positive"));
        }
        if let Some(rank) = self.speaker_space_rank {
            if rank == 0 || rank + self.n_emotions > self.feature_dim {
                return Err(Error::invalid(format!(
                    "speaker_space_rank must lie in [1, feature_dim - n_emotions = {}] so \
                     the speaker subspace fits alongside the emotion prototypes, got {rank}",
                    self.feature_dim.saturating_sub(self.n_emotions)
                )));
            }
        }
        Ok(())
    }

    /// Preferred emotion of speaker `s`.
    pub(crate) fn preferred_emotion(&self, speaker: usize, permutation: &[usize]) -> usize {
        permutation[speaker % self.n_emotions]
    }
}

/// One labeled sample: utterance id, speaker label, emotion label, features.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub id: String,
    pub speaker: usize,
    pub emotion: usize,
    pub features: Vec<f64>,
}

/// A labeled dataset plus its label cardinalities.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n_speakers: usize,
    n_emotions: usize,
    feature_dim: usize,
    records: Vec<Record>,
    /// Generator echo, carried into the sidecar manifest when saved.
    source_spec: Option<SynthSpec>,
}

impl Dataset {
    /// Validates and assembles a dataset: unique ids, labels within the
    /// declared cardinalities, uniform feature width.
    pub fn new(
        n_speakers: usize,
        n_emotions: usize,
        feature_dim: usize,
        records: Vec<Record>,
    ) -> Result<Self> {
        let mut seen = std::collections::HashSet::with_capacity(records.len());
        for (i, record) in records.iter().enumerate() {
            if record.features.len() != feature_dim {
                return Err(Error::shape(
                    format!("Dataset record {i}"),
                    format!("feature_dim {feature_dim}"),
                    format!("{} features", record.features.len()),
                ));
            }
            if record.speaker >= n_speakers {
                return Err(Error::invalid(format!(
                    "record {i}: speaker {} out of range for {n_speakers} speakers",
                    record.speaker
                )));
            }
            if record.emotion >= n_emotions {
                return Err(Error::invalid(format!(
                    "record {i}: emotion {} out of range for {n_emotions} emotions",
                    record.emotion
                )));
            }
            if !seen.insert(record.id.as_str()) {
                return Err(Error::invalid(format!(
                    "duplicate utterance id {:?} at record {i}",
                    record.id
                )));
            }
        }
        Ok(Dataset {
            n_speakers,
            n_emotions,
            feature_dim,
            records,
            source_spec: None,
        })
    }

    pub(crate) fn with_source_spec(mut self, spec: SynthSpec) -> Self {
        self.source_spec = Some(spec);
        self
    }

    pub fn n_speakers(&self) -> usize {
        self.n_speakers
    }

    pub fn n_emotions(&self) -> usize {
        self.n_emotions
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn source_spec(&self) -> Option<&SynthSpec> {
        self.source_spec.as_ref()
    }

    /// Materializes the subset selected by `indices` (in the given order).
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let records = indices
            .iter()
            .map(|&i| {
                self.records
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::invalid(format!("index {i} out of range for {} records", self.len())))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut subset = Dataset::new(self.n_speakers, self.n_emotions, self.feature_dim, records)?;
        subset.source_spec = self.source_spec.clone();
        Ok(subset)
    }

    /// Stacks the selected records' features as batch rows.
    pub fn features_of(&self, indices: &[usize]) -> Result<Matrix64> {
        let mut data = Vec::with_capacity(indices.len() * self.feature_dim);
        for &i in indices {
            let record = self
                .records
                .get(i)
                .ok_or_else(|| Error::invalid(format!("index {i} out of range for {} records", self.len())))?;
            data.extend_from_slice(&record.features);
        }
        Matrix::from_vec(indices.len(), self.feature_dim, data)
    }

    /// Feature batch plus emotion labels only: the emotion task never sees
    /// the speaker column.
    pub fn emotion_batch(&self, indices: &[usize]) -> Result<(Matrix64, Vec<usize>)> {
        let features = self.features_of(indices)?;
        let labels = indices.iter().map(|&i| self.records[i].emotion).collect();
        Ok((features, labels))
    }

    /// Feature batch plus speaker labels only: the speaker task never sees
    /// the emotion column.
    pub fn speaker_batch(&self, indices: &[usize]) -> Result<(Matrix64, Vec<usize>)> {
        let features = self.features_of(indices)?;
        let labels = indices.iter().map(|&i| self.records[i].speaker).collect();
        Ok((features, labels))
    }

    /// Record counts per emotion class.
    pub fn emotion_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_emotions];
        for record in &self.records {
            counts[record.emotion] += 1;
        }
        counts
    }

    /// Distinct speakers present, ascending.
    pub fn speakers_present(&self) -> Vec<usize> {
        let mut present: Vec<bool> = vec![false; self.n_speakers];
        for record in &self.records {
            present[record.speaker] = true;
        }
        present
            .iter()
            .enumerate()
            .filter_map(|(s, &p)| p.then_some(s))
            .collect()
    }
}
