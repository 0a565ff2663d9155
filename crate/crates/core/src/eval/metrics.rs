use crate::error::{Error, Result};

use super::{Metric, MetricName};

/// Weighted accuracy: the overall fraction of correct predictions, which
/// weights each class by its frequency.
pub fn weighted_accuracy(predictions: &[usize], labels: &[usize]) -> Result<Metric> {
    if predictions.len() != labels.len() {
        return Err(Error::shape(
            "weighted_accuracy",
            format!("{} predictions", predictions.len()),
            format!("{} labels", labels.len()),
        ));
    }
    if predictions.is_empty() {
        return Err(Error::invalid("weighted_accuracy: empty inputs"));
    }
    let correct = predictions
        .iter()
        .zip(labels)
        .filter(|(p, l)| p == l)
        .count();
    Metric::new(
        MetricName::WeightedAccuracy,
        correct as f64 / predictions.len() as f64,
        predictions.len(),
    )
}

/// Area under a piecewise-linear curve by the trapezoid rule, normalized by
/// the x range so a curve of scores in [0, 1] yields a value in [0, 1] — an
/// average of the scores across the range.
pub fn auc(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::invalid(format!(
            "auc needs at least 2 points, got {}",
            points.len()
        )));
    }
    for (i, &(x, y)) in points.iter().enumerate() {
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::invalid(format!("auc point {i} is not finite")));
        }
        if !(0.0..=1.0).contains(&y) {
            return Err(Error::invalid(format!(
                "auc point {i}: y must lie in [0, 1], got {y}"
            )));
        }
        if i > 0 {
            let prev = points[i - 1].0;
            if x == prev {
                return Err(Error::invalid(format!("auc: duplicate x value {x} at point {i}")));
            }
            if x < prev {
                return Err(Error::invalid(format!(
                    "auc: x values must be strictly increasing ({prev} then {x})"
                )));
            }
        }
    }
    let span = points[points.len() - 1].0 - points[0].0;
    let mut area = 0.0;
    for pair in points.windows(2) {
        let (x0, y0) = pair[0];
        let (x1, y1) = pair[1];
        area += (x1 - x0) * (y0 + y1) / 2.0;
    }
    Ok(area / span)
}
