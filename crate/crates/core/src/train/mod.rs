//! Two-step adversarial training: an emotion descent step interleaved with a
//! speaker step that descends the speaker head while pushing the shared
//! representation *up* the speaker loss, under one of three strategies.

mod assembly;
mod run;
mod step;

pub use assembly::{
    format_assembly, load_assembly, parse_assembly, save_assembly, AssemblyPlan, ModelAssembly,
};
pub use run::{train, EpochRecord, TrainReport};
pub use step::{emotion_step, speaker_step};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the adversarial speaker step touches the shared representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Speaker Normalization Projector: a single non-linear gate layer after
    /// the upstream encoder absorbs the adversarial update; the upstream
    /// stays frozen during speaker steps (and gets no gradients there).
    Snp,
    /// Train All Parameters: the upstream encoder itself receives the
    /// adversarial ascent.
    Tap,
    /// No adversary: speaker steps are never scheduled and λ is forced to 0.
    Baseline,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Snp => "snp",
            Strategy::Tap => "tap",
            Strategy::Baseline => "baseline",
        }
    }

    /// Whether assemblies for this strategy carry a projector.
    pub fn uses_projector(self) -> bool {
        matches!(self, Strategy::Snp)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "snp" => Ok(Strategy::Snp),
            "tap" => Ok(Strategy::Tap),
            "baseline" => Ok(Strategy::Baseline),
            other => Err(Error::invalid(format!(
                "unknown strategy {other:?} (expected snp, tap, or baseline)"
            ))),
        }
    }
}

/// Hyperparameters of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Descent learning rate η, shared by both heads and the upstream.
    pub eta: f64,
    /// Adversarial ascent strength λ on the shared representation.
    pub lambda: f64,
    pub strategy: Strategy,
    pub epochs: usize,
    pub batch_size: usize,
    /// Speaker steps scheduled after each emotion mini-batch step.
    pub speaker_steps_per_emotion_step: usize,
    pub seed: u64,
}

impl TrainConfig {
    /// Defaults for the desk-scale experiments; callers override fields.
    pub fn new(strategy: Strategy, seed: u64) -> Self {
        TrainConfig {
            eta: 0.05,
            lambda: 0.001,
            strategy,
            epochs: 50,
            batch_size: 32,
            speaker_steps_per_emotion_step: 1,
            seed,
        }
    }

    /// The validation/stopping metric is fixed; recorded here so reports can
    /// echo it.
    pub fn validation_metric(&self) -> &'static str {
        "weighted_accuracy"
    }

    /// Checks ranges and normalizes the config: BASELINE always runs with
    /// λ = 0 whatever the caller wrote.
    pub fn validated(&self) -> Result<TrainConfig> {
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::invalid(format!("eta must be positive and finite, got {}", self.eta)));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::invalid(format!(
                "lambda must be non-negative and finite, got {}",
                self.lambda
            )));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be at least 1"));
        }
        let mut config = self.clone();
        if config.strategy == Strategy::Baseline {
            config.lambda = 0.0;
        }
        Ok(config)
    }
}
