use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

use super::Dataset;

// Stream tags disjoint from the generator's (1..=5), so splitting with the
// same seed as generation still uses unrelated randomness.
const STREAM_SPEAKER_GROUPS: u64 = 16;
const STREAM_FOLD_VALIDATION: u64 = 17; // + fold index
const STREAM_RANDOM_SPLIT: u64 = 64;
const STREAM_SUBSAMPLE: u64 = 128; // + class index

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Test speakers never appear in train or validation.
    SpeakerIndependent,
    /// Random partition of records; speakers may straddle parts.
    SpeakerDependent,
}

/// Index-based train/validation/test partition of one dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSplit {
    pub fold_index: usize,
    pub mode: SplitMode,
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl FoldSplit {
    /// Checks the partition invariants against its dataset: index validity,
    /// pairwise disjointness, and speaker disjointness when the mode claims it.
    pub fn validate(&self, dataset: &Dataset) -> Result<()> {
        let mut seen = vec![false; dataset.len()];
        for (part, indices) in [
            ("train", &self.train),
            ("validation", &self.validation),
            ("test", &self.test),
        ] {
            for &i in indices.iter() {
                if i >= dataset.len() {
                    return Err(Error::contract(format!(
                        "fold {}: {part} index {i} out of range for {} records",
                        self.fold_index,
                        dataset.len()
                    )));
                }
                if seen[i] {
                    return Err(Error::contract(format!(
                        "fold {}: record {i} assigned to more than one part",
                        self.fold_index
                    )));
                }
                seen[i] = true;
            }
        }
        if self.mode == SplitMode::SpeakerIndependent {
            let mut in_test = std::collections::HashSet::new();
            for &i in &self.test {
                in_test.insert(dataset.records()[i].speaker);
            }
            for &i in self.train.iter().chain(&self.validation) {
                let s = dataset.records()[i].speaker;
                if in_test.contains(&s) {
                    return Err(Error::contract(format!(
                        "fold {}: speaker {s} appears in both test and train/validation",
                        self.fold_index
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Speaker-independent k-fold cross-validation splits.
///
/// Speakers are shuffled once and cut into k equal groups; fold i holds out
/// group i's records as test and randomly reserves `validation_fraction` of
/// the remaining records for validation. The speaker count must divide evenly
/// into k groups.
pub fn split_speaker_independent(
    dataset: &Dataset,
    k_folds: usize,
    validation_fraction: f64,
    seed: u64,
) -> Result<Vec<FoldSplit>> {
    if k_folds < 2 {
        return Err(Error::invalid("k_folds must be at least 2"));
    }
    if !(validation_fraction > 0.0 && validation_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "validation_fraction must lie in (0, 1), got {validation_fraction}"
        )));
    }
    let n_speakers = dataset.n_speakers();
    if k_folds > n_speakers {
        return Err(Error::invalid(format!(
            "k_folds {k_folds} exceeds speaker count {n_speakers}"
        )));
    }
    if n_speakers % k_folds != 0 {
        return Err(Error::invalid(format!(
            "speaker count {n_speakers} is not divisible into {k_folds} equal groups"
        )));
    }

    let mut speakers: Vec<usize> = (0..n_speakers).collect();
    SplitMix64::derive(seed, STREAM_SPEAKER_GROUPS).shuffle(&mut speakers);
    let group_size = n_speakers / k_folds;

    let mut folds = Vec::with_capacity(k_folds);
    for fold_index in 0..k_folds {
        let held_out: std::collections::HashSet<usize> = speakers
            [fold_index * group_size..(fold_index + 1) * group_size]
            .iter()
            .copied()
            .collect();

        let mut test = Vec::new();
        let mut remaining = Vec::new();
        for (i, record) in dataset.records().iter().enumerate() {
            if held_out.contains(&record.speaker) {
                test.push(i);
            } else {
                remaining.push(i);
            }
        }
        let n_validation = (validation_fraction * remaining.len() as f64).floor() as usize;
        if n_validation == 0 || n_validation >= remaining.len() {
            return Err(Error::invalid(format!(
                "fold {fold_index}: validation_fraction {validation_fraction} leaves an empty part \
                 ({} non-test records)",
                remaining.len()
            )));
        }
        SplitMix64::derive(seed, STREAM_FOLD_VALIDATION + fold_index as u64).shuffle(&mut remaining);
        let mut validation = remaining.split_off(remaining.len() - n_validation);
        let mut train = remaining;
        train.sort_unstable();
        validation.sort_unstable();

        let fold = FoldSplit {
            fold_index,
            mode: SplitMode::SpeakerIndependent,
            train,
            validation,
            test,
        };
        fold.validate(dataset)?;
        folds.push(fold);
    }
    Ok(folds)
}

/// Random (speaker-dependent) train/validation/test split with the given
/// ratios, which must be positive and sum to 1.
pub fn split_speaker_dependent(
    dataset: &Dataset,
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<FoldSplit> {
    let (r_train, r_validation, r_test) = ratios;
    for (name, r) in [("train", r_train), ("validation", r_validation), ("test", r_test)] {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::invalid(format!("{name} ratio must be positive, got {r}")));
        }
    }
    if (r_train + r_validation + r_test - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "split ratios must sum to 1, got {}",
            r_train + r_validation + r_test
        )));
    }

    let n = dataset.len();
    let mut order: Vec<usize> = (0..n).collect();
    SplitMix64::derive(seed, STREAM_RANDOM_SPLIT).shuffle(&mut order);

    // Cumulative rounding keeps the three part sizes within one record of the
    // exact ratios and always exhausts the dataset.
    let cut_train = (r_train * n as f64).round() as usize;
    let cut_validation = ((r_train + r_validation) * n as f64).round() as usize;
    if cut_train == 0 || cut_validation <= cut_train || cut_validation >= n {
        return Err(Error::invalid(format!(
            "ratios {ratios:?} produce an empty part for {n} records"
        )));
    }

    let mut train = order[..cut_train].to_vec();
    let mut validation = order[cut_train..cut_validation].to_vec();
    let mut test = order[cut_validation..].to_vec();
    train.sort_unstable();
    validation.sort_unstable();
    test.sort_unstable();

    let fold = FoldSplit {
        fold_index: 0,
        mode: SplitMode::SpeakerDependent,
        train,
        validation,
        test,
    };
    fold.validate(dataset)?;
    Ok(fold)
}

/// Picks `n_per_class` records per emotion class from `pool` (indices into
/// `dataset`), seeded; errors if any class is short.
pub fn subsample_indices_per_class(
    dataset: &Dataset,
    pool: &[usize],
    n_per_class: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    if n_per_class == 0 {
        return Err(Error::invalid("n_per_class must be positive"));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); dataset.n_emotions()];
    for &i in pool {
        let record = dataset
            .records()
            .get(i)
            .ok_or_else(|| Error::invalid(format!("index {i} out of range for {} records", dataset.len())))?;
        by_class[record.emotion].push(i);
    }
    let mut chosen = Vec::with_capacity(n_per_class * dataset.n_emotions());
    for (class, mut indices) in by_class.into_iter().enumerate() {
        if indices.len() < n_per_class {
            return Err(Error::invalid(format!(
                "emotion class {class} has only {} records, need {n_per_class}",
                indices.len()
            )));
        }
        SplitMix64::derive(seed, STREAM_SUBSAMPLE + class as u64).shuffle(&mut indices);
        chosen.extend_from_slice(&indices[..n_per_class]);
    }
    chosen.sort_unstable();
    Ok(chosen)
}

/// Class-balanced subsample of a whole dataset.
pub fn subsample_per_class(dataset: &Dataset, n_per_class: usize, seed: u64) -> Result<Dataset> {
    let pool: Vec<usize> = (0..dataset.len()).collect();
    let chosen = subsample_indices_per_class(dataset, &pool, n_per_class, seed)?;
    dataset.subset(&chosen)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, SynthSpec};

    fn small_dataset() -> Dataset {
        generate(&SynthSpec {
            n_speakers: 10,
            samples_per_speaker: 20,
            ..SynthSpec::benchmark(3)
        })
        .unwrap()
    }

    #[test]
    fn speaker_independent_folds_partition_all_records() {
        let data = small_dataset();
        let folds = split_speaker_independent(&data, 5, 0.15, 7).unwrap();
        assert_eq!(folds.len(), 5);
        // Every record is tested exactly once across folds.
        let mut tested = vec![0usize; data.len()];
        for fold in &folds {
            assert_eq!(fold.train.len() + fold.validation.len() + fold.test.len(), data.len());
            for &i in &fold.test {
                tested[i] += 1;
            }
        }
        assert!(tested.iter().all(|&c| c == 1));
    }

    #[test]
    fn speaker_independent_folds_hold_out_whole_speakers() {
        let data = small_dataset();
        for fold in split_speaker_independent(&data, 5, 0.15, 7).unwrap() {
            let test_speakers: std::collections::HashSet<usize> =
                fold.test.iter().map(|&i| data.records()[i].speaker).collect();
            assert_eq!(test_speakers.len(), 2, "10 speakers over 5 folds");
            for &i in fold.train.iter().chain(&fold.validation) {
                assert!(!test_speakers.contains(&data.records()[i].speaker));
            }
        }
    }

    #[test]
    fn speaker_independent_requires_even_groups() {
        let data = small_dataset();
        let err = split_speaker_independent(&data, 3, 0.15, 7).unwrap_err();
        assert!(err.to_string().contains("divisible"), "{err}");
    }

    #[test]
    fn speaker_independent_is_seed_deterministic() {
        let data = small_dataset();
        let a = split_speaker_independent(&data, 5, 0.15, 7).unwrap();
        let b = split_speaker_independent(&data, 5, 0.15, 7).unwrap();
        let c = split_speaker_independent(&data, 5, 0.15, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn speaker_dependent_sizes_follow_ratios() {
        let data = small_dataset(); // 200 records
        let split = split_speaker_dependent(&data, (0.8, 0.1, 0.1), 5).unwrap();
        assert_eq!(split.train.len(), 160);
        assert_eq!(split.validation.len(), 20);
        assert_eq!(split.test.len(), 20);
        split.validate(&data).unwrap();
    }

    #[test]
    fn speaker_dependent_rejects_bad_ratios() {
        let data = small_dataset();
        assert!(split_speaker_dependent(&data, (0.8, 0.1, 0.2), 5).is_err());
        assert!(split_speaker_dependent(&data, (0.0, 0.5, 0.5), 5).is_err());
    }

    #[test]
    fn subsample_is_class_balanced_and_seeded() {
        let data = small_dataset();
        let sub = subsample_per_class(&data, 8, 21).unwrap();
        assert_eq!(sub.len(), 8 * data.n_emotions());
        assert!(sub.emotion_counts().iter().all(|&c| c == 8));
        let again = subsample_per_class(&data, 8, 21).unwrap();
        assert_eq!(sub, again);
    }

    #[test]
    fn subsample_errors_when_a_class_is_short() {
        let data = small_dataset();
        let counts = data.emotion_counts();
        let too_many = counts.iter().copied().min().unwrap() + 1;
        let err = subsample_per_class(&data, too_many, 21).unwrap_err();
        assert!(err.to_string().contains("only"), "{err}");
    }
}
