use serde::Serialize;

use crate::error::{Error, Result};
use crate::eval::weighted_accuracy;
use crate::rng::SplitMix64;
use crate::synth::{Dataset, FoldSplit};

use super::{emotion_step, speaker_step, ModelAssembly, Strategy, TrainConfig};

// Schedule streams under the config seed: one for the emotion mini-batch
// shuffle, one for the independently cycling speaker iterator. BASELINE never
// consumes the speaker stream, so adding the adversary cannot perturb the
// emotion-side schedule.
const STREAM_EMOTION_SHUFFLE: u64 = 20;
const STREAM_SPEAKER_CYCLE: u64 = 21;

/// Endlessly cycling, reshuffling index iterator over a speaker dataset.
struct SpeakerCycle {
    order: Vec<usize>,
    position: usize,
    rng: SplitMix64,
}

impl SpeakerCycle {
    fn new(len: usize, mut rng: SplitMix64) -> Self {
        let mut order: Vec<usize> = (0..len).collect();
        rng.shuffle(&mut order);
        SpeakerCycle {
            order,
            position: 0,
            rng,
        }
    }

    fn next_batch(&mut self, size: usize) -> Vec<usize> {
        let mut batch = Vec::with_capacity(size);
        while batch.len() < size {
            if self.position == self.order.len() {
                self.rng.shuffle(&mut self.order);
                self.position = 0;
            }
            batch.push(self.order[self.position]);
            self.position += 1;
        }
        batch
    }
}

/// Loss/metric trace of one epoch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    /// Sample-weighted mean emotion train loss across the epoch's batches.
    pub train_loss: f64,
    pub validation_wa: f64,
}

/// Everything a training run produced.
#[derive(Debug, Clone, Serialize)]
pub struct TrainReport {
    /// Echo of the (validated) configuration the run used.
    pub config: TrainConfig,
    pub epochs: Vec<EpochRecord>,
    /// Epoch with the highest validation weighted accuracy; ties go to the
    /// earliest epoch.
    pub best_epoch: usize,
    pub best_validation_wa: f64,
    pub emotion_steps: u64,
    pub speaker_steps: u64,
    /// Parameter snapshot taken at `best_epoch`.
    #[serde(skip)]
    pub best_model: ModelAssembly,
}

/// Runs the two-step training schedule: per epoch, iterate shuffled emotion
/// mini-batches; after each emotion step run `speaker_steps_per_emotion_step`
/// adversarial speaker steps on batches drawn from an independently cycling
/// iterator over `speaker_data` (none under BASELINE). Validation weighted
/// accuracy is measured each epoch and the best-epoch snapshot kept.
///
/// The two tasks may use different datasets; only `emotion_data` needs
/// emotion labels and only `speaker_data` needs speaker labels.
pub fn train(
    model: &mut ModelAssembly,
    emotion_data: &Dataset,
    split: &FoldSplit,
    speaker_data: &Dataset,
    config: &TrainConfig,
) -> Result<TrainReport> {
    let config = config.validated()?;
    if model.strategy() != config.strategy {
        return Err(Error::invalid(format!(
            "config strategy {} does not match model strategy {}",
            config.strategy,
            model.strategy()
        )));
    }
    if split.train.is_empty() {
        return Err(Error::invalid("train split is empty"));
    }
    if split.validation.is_empty() {
        return Err(Error::invalid("validation split is empty"));
    }
    split.validate(emotion_data)?;
    if emotion_data.feature_dim() != model.feature_dim() {
        return Err(Error::shape(
            "train emotion data",
            format!("model feature dim {}", model.feature_dim()),
            format!("dataset feature dim {}", emotion_data.feature_dim()),
        ));
    }
    if emotion_data.n_emotions() > model.emotion_head().out_dim() {
        return Err(Error::invalid(format!(
            "dataset has {} emotion classes but the head emits {}",
            emotion_data.n_emotions(),
            model.emotion_head().out_dim()
        )));
    }
    let runs_speaker_steps =
        config.strategy != Strategy::Baseline && config.speaker_steps_per_emotion_step > 0;
    if runs_speaker_steps {
        if speaker_data.is_empty() {
            return Err(Error::invalid("speaker dataset is empty"));
        }
        if speaker_data.feature_dim() != model.feature_dim() {
            return Err(Error::shape(
                "train speaker data",
                format!("model feature dim {}", model.feature_dim()),
                format!("dataset feature dim {}", speaker_data.feature_dim()),
            ));
        }
        if speaker_data.n_speakers() > model.speaker_head().out_dim() {
            return Err(Error::invalid(format!(
                "dataset has {} speakers but the head emits {}",
                speaker_data.n_speakers(),
                model.speaker_head().out_dim()
            )));
        }
    }

    let mut emotion_rng = SplitMix64::derive(config.seed, STREAM_EMOTION_SHUFFLE);
    let mut speaker_cycle = SpeakerCycle::new(
        speaker_data.len(),
        SplitMix64::derive(config.seed, STREAM_SPEAKER_CYCLE),
    );

    let (validation_features, validation_labels) = emotion_data.emotion_batch(&split.validation)?;

    let mut train_indices = split.train.clone();
    let mut epochs = Vec::with_capacity(config.epochs);
    let mut emotion_steps = 0u64;
    let mut speaker_steps = 0u64;
    let mut best: Option<(usize, f64, ModelAssembly)> = None;

    for epoch in 0..config.epochs {
        emotion_rng.shuffle(&mut train_indices);
        let mut loss_sum = 0.0;
        for batch in train_indices.chunks(config.batch_size) {
            let (features, labels) = emotion_data.emotion_batch(batch)?;
            let loss = emotion_step(model, &features, &labels, config.eta)?;
            loss_sum += loss * batch.len() as f64;
            emotion_steps += 1;

            if runs_speaker_steps {
                for _ in 0..config.speaker_steps_per_emotion_step {
                    let speaker_batch = speaker_cycle.next_batch(config.batch_size);
                    let (features, labels) = speaker_data.speaker_batch(&speaker_batch)?;
                    speaker_step(model, &features, &labels, config.eta, config.lambda)?;
                    speaker_steps += 1;
                }
            }
        }

        let predictions = model.predict_emotion(&validation_features)?;
        let validation_wa = weighted_accuracy(&predictions, &validation_labels)?.value;
        epochs.push(EpochRecord {
            train_loss: loss_sum / split.train.len() as f64,
            validation_wa,
        });
        // Strictly-greater comparison: ties keep the earliest epoch.
        if best.as_ref().map_or(true, |(_, wa, _)| validation_wa > *wa) {
            best = Some((epoch, validation_wa, model.snapshot()));
        }
    }

    let (best_epoch, best_validation_wa, best_model) = best.expect("epochs >= 1");
    Ok(TrainReport {
        config,
        epochs,
        best_epoch,
        best_validation_wa,
        emotion_steps,
        speaker_steps,
        best_model,
    })
}
