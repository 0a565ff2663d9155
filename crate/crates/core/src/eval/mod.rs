//! Measurement protocols: weighted accuracy, cross-validated evaluation
//! under both split regimes, the frozen-upstream speaker probe, and
//! low-resource learning curves with normalized AUC.

mod csv;
mod curve;
mod cv;
mod metrics;
mod probe;

pub use csv::{format_cv_csv, format_curve_csv, parse_curve_csv};
pub use curve::{low_resource_curve, CurvePoint, CurveResult};
pub use cv::{cross_validate, CrossValidationReport, EvalProtocol, FoldOutcome};
pub use metrics::{auc, weighted_accuracy};
pub use probe::{probe_speaker_id, ProbeConfig};

use serde::Serialize;

use crate::error::{Error, Result};

/// What a [`Metric`] measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricName {
    WeightedAccuracy,
    ProbeAccuracy,
    Auc,
}

/// A bounded score plus the number of samples it was measured on.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metric {
    pub name: MetricName,
    pub value: f64,
    pub support: usize,
}

impl Metric {
    pub fn new(name: MetricName, value: f64, support: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::invalid(format!(
                "metric value must lie in [0, 1], got {value}"
            )));
        }
        if support == 0 {
            return Err(Error::invalid("metric support must be positive"));
        }
        Ok(Metric {
            name,
            value,
            support,
        })
    }
}
