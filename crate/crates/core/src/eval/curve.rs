use serde::Serialize;

use crate::error::{Error, Result};
use crate::parallel::run_indexed;
use crate::rng::SplitMix64;
use crate::synth::{split_speaker_dependent, subsample_indices_per_class, Dataset, FoldSplit};
use crate::train::{train, AssemblyPlan, TrainConfig};

use super::{auc, weighted_accuracy};

// Derived-seed streams per (size, repeat) work unit.
const STREAM_LOWRES_SPLIT: u64 = 64;
const STREAM_LOWRES_SUBSAMPLE: u64 = 65;
const STREAM_LOWRES_MODEL: u64 = 66;
const STREAM_LOWRES_TRAIN: u64 = 67;

/// One training-set size on the learning curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub n_per_class: usize,
    /// Test accuracy of each repeat, in repeat order.
    pub accuracies: Vec<f64>,
    pub mean: f64,
}

/// A low-resource learning curve plus its normalized area.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveResult {
    pub points: Vec<CurvePoint>,
    pub auc: f64,
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sweeps training-set size: for each `n_per_class` in `sizes`, runs
/// `repeats` independent random splits, each time subsampling the train part
/// to `n_per_class` records per emotion class, training a fresh model, and
/// scoring its best snapshot on the split's test records. Points carry the
/// per-repeat and mean accuracies; the result carries the normalized AUC over
/// (size, mean). Work units fan out over `jobs` workers deterministically.
pub fn low_resource_curve(
    dataset: &Dataset,
    sizes: &[usize],
    repeats: usize,
    ratios: (f64, f64, f64),
    plan: &AssemblyPlan,
    config: &TrainConfig,
    jobs: usize,
) -> Result<CurveResult> {
    let config = config.validated()?;
    if sizes.len() < 2 {
        return Err(Error::invalid("low_resource_curve needs at least 2 sizes"));
    }
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("sizes must be strictly ascending"));
    }
    if repeats == 0 {
        return Err(Error::invalid("repeats must be at least 1"));
    }

    let units = sizes.len() * repeats;
    let accuracies = run_indexed(units, jobs, |unit| -> Result<f64> {
        let size = sizes[unit / repeats];
        // Each (size, repeat) unit draws its own independent streams, keyed
        // by the flat unit index so extending `sizes` never perturbs the
        // points already on the curve.
        let tag = (unit * 4) as u64;
        let split_seed = SplitMix64::derive(config.seed, STREAM_LOWRES_SPLIT + tag).next_u64();
        let full: FoldSplit = split_speaker_dependent(dataset, ratios, split_seed)?;

        let subsample_seed =
            SplitMix64::derive(config.seed, STREAM_LOWRES_SUBSAMPLE + tag).next_u64();
        let train_indices =
            subsample_indices_per_class(dataset, &full.train, size, subsample_seed)?;
        let split = FoldSplit {
            train: train_indices,
            ..full
        };

        let mut model =
            plan.build(SplitMix64::derive(config.seed, STREAM_LOWRES_MODEL + tag).next_u64())?;
        let unit_config = TrainConfig {
            seed: SplitMix64::derive(config.seed, STREAM_LOWRES_TRAIN + tag).next_u64(),
            ..config.clone()
        };
        let speaker_source = dataset.subset(&split.train)?;
        let report = train(&mut model, dataset, &split, &speaker_source, &unit_config)?;

        let (test_features, test_labels) = dataset.emotion_batch(&split.test)?;
        let predictions = report.best_model.predict_emotion(&test_features)?;
        Ok(weighted_accuracy(&predictions, &test_labels)?.value)
    })?;

    let points: Vec<CurvePoint> = sizes
        .iter()
        .enumerate()
        .map(|(i, &n_per_class)| {
            let accuracies = accuracies[i * repeats..(i + 1) * repeats].to_vec();
            let mean = mean(&accuracies);
            CurvePoint {
                n_per_class,
                accuracies,
                mean,
            }
        })
        .collect();
    let curve: Vec<(f64, f64)> = points.iter().map(|p| (p.n_per_class as f64, p.mean)).collect();
    let auc = auc(&curve)?;
    Ok(CurveResult { points, auc })
}
