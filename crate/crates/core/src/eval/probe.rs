use serde::Serialize;

use crate::error::{Error, Result};
use crate::nn::{argmax_rows, softmax_cross_entropy, Activation, UpdateDirection};
use crate::rng::SplitMix64;
use crate::synth::Dataset;
use crate::{Matrix64, Mlp64};

use super::{weighted_accuracy, Metric, MetricName};

const STREAM_PROBE_SPLIT: u64 = 48;
const STREAM_PROBE_INIT: u64 = 49;
const STREAM_PROBE_SHUFFLE: u64 = 50;

/// Hyperparameters of the speaker-ID probe run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeConfig {
    pub eta: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Fraction of the dataset the probe head trains on; the rest is the
    /// held-out set the metric is measured on.
    pub train_fraction: f64,
    pub seed: u64,
}

impl ProbeConfig {
    pub fn new(seed: u64) -> Self {
        ProbeConfig {
            eta: 0.05,
            epochs: 30,
            batch_size: 32,
            train_fraction: 0.8,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::invalid(format!("probe eta must be positive, got {}", self.eta)));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid("probe epochs and batch_size must be at least 1"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "probe train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        Ok(())
    }
}

fn gather_rows(matrix: &Matrix64, indices: &[usize]) -> Matrix64 {
    let mut data = Vec::with_capacity(indices.len() * matrix.cols());
    for &i in indices {
        data.extend_from_slice(matrix.row(i));
    }
    Matrix64::from_vec(indices.len(), matrix.cols(), data).expect("consistent row widths")
}

/// How much speaker identity a frozen representation still carries: trains a
/// fresh linear speaker head on the frozen upstream(+projector) outputs and
/// reports the best held-out speaker-ID accuracy (same stopping rule as main
/// training). The snapshots are borrowed immutably and never modified.
pub fn probe_speaker_id(
    upstream: &Mlp64,
    projector: Option<&Mlp64>,
    dataset: &Dataset,
    config: &ProbeConfig,
) -> Result<Metric> {
    config.validate()?;
    if dataset.feature_dim() != upstream.in_dim() {
        return Err(Error::shape(
            "probe dataset→upstream",
            format!("upstream in {}", upstream.in_dim()),
            format!("dataset feature dim {}", dataset.feature_dim()),
        ));
    }
    if let Some(p) = projector {
        if p.in_dim() != upstream.out_dim() {
            return Err(Error::shape(
                "probe upstream→projector",
                format!("upstream out {}", upstream.out_dim()),
                format!("projector in {}", p.in_dim()),
            ));
        }
    }
    if dataset.is_empty() {
        return Err(Error::invalid("probe dataset is empty"));
    }

    // Freeze: representations are computed once, up front; training below
    // touches only the fresh head.
    let all_indices: Vec<usize> = (0..dataset.len()).collect();
    let (features, speaker_labels) = dataset.speaker_batch(&all_indices)?;
    let (upstream_out, _) = upstream.forward(&features)?;
    let representations = match projector {
        Some(p) => p.forward(&upstream_out)?.0,
        None => upstream_out,
    };

    let mut order = all_indices;
    SplitMix64::derive(config.seed, STREAM_PROBE_SPLIT).shuffle(&mut order);
    let n_train = (config.train_fraction * order.len() as f64).floor() as usize;
    if n_train == 0 || n_train == order.len() {
        return Err(Error::invalid(format!(
            "probe train_fraction {} leaves an empty part for {} records",
            config.train_fraction,
            order.len()
        )));
    }
    let (train_indices, heldout_indices) = order.split_at(n_train);
    let mut train_indices = train_indices.to_vec();

    let heldout_features = gather_rows(&representations, heldout_indices);
    let heldout_labels: Vec<usize> = heldout_indices.iter().map(|&i| speaker_labels[i]).collect();

    let mut head = Mlp64::init(
        &[representations.cols(), dataset.n_speakers()],
        &[Activation::Identity],
        &mut SplitMix64::derive(config.seed, STREAM_PROBE_INIT),
    )?;
    let mut shuffle_rng = SplitMix64::derive(config.seed, STREAM_PROBE_SHUFFLE);

    let mut best_wa: Option<f64> = None;
    for _ in 0..config.epochs {
        shuffle_rng.shuffle(&mut train_indices);
        for batch in train_indices.chunks(config.batch_size) {
            let batch_features = gather_rows(&representations, batch);
            let batch_labels: Vec<usize> = batch.iter().map(|&i| speaker_labels[i]).collect();
            let (logits, cache) = head.forward(&batch_features)?;
            let (_, dlogits) = softmax_cross_entropy(&logits, &batch_labels)?;
            let (grads, _) = head.backward(&cache, &dlogits)?;
            head.apply_update(&grads, config.eta, UpdateDirection::Descent)?;
        }
        let predictions = argmax_rows(&head.forward(&heldout_features)?.0);
        let wa = weighted_accuracy(&predictions, &heldout_labels)?.value;
        if best_wa.map_or(true, |b| wa > b) {
            best_wa = Some(wa);
        }
    }

    Metric::new(
        MetricName::ProbeAccuracy,
        best_wa.expect("epochs >= 1"),
        heldout_labels.len(),
    )
}
