//! Classification loss.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Mean softmax cross-entropy over a batch of logit rows.
///
/// Returns the loss and `d loss / d logits`. Rows are averaged, not summed,
/// so learning rates do not depend on batch size. The gradient is
/// `(softmax - one_hot) / rows`.
pub fn softmax_cross_entropy<F: Scalar>(logits: &Matrix<F>, labels: &[usize]) -> Result<(F, Matrix<F>)> {
    if labels.len() != logits.rows() {
        return Err(Error::shape(
            "softmax_cross_entropy",
            format!("{} logit rows", logits.rows()),
            format!("{} labels", labels.len()),
        ));
    }
    if logits.rows() == 0 {
        return Err(Error::invalid("softmax_cross_entropy needs a non-empty batch"));
    }
    for (row, &label) in labels.iter().enumerate() {
        if label >= logits.cols() {
            return Err(Error::invalid(format!(
                "label {label} at row {row} out of range for {} classes",
                logits.cols()
            )));
        }
    }

    let n = F::from_f64_lossy(logits.rows() as f64);
    let mut dlogits = Matrix::zeros(logits.rows(), logits.cols());
    let mut total = F::zero();
    for r in 0..logits.rows() {
        let row = logits.row(r);
        // Max-shifted for numerical stability.
        let max = row.iter().copied().fold(F::neg_infinity(), F::max);
        let mut denom = F::zero();
        for &z in row {
            denom = denom + (z - max).exp();
        }
        let log_denom = denom.ln();
        total = total + log_denom - (row[labels[r]] - max);

        let drow = dlogits.row_mut(r);
        for (c, (&z, d)) in row.iter().zip(drow.iter_mut()).enumerate() {
            let softmax = (z - max).exp() / denom;
            let one_hot = if c == labels[r] { F::one() } else { F::zero() };
            *d = (softmax - one_hot) / n;
        }
    }
    let loss = total / n;
    if !loss.is_finite() || !dlogits.all_finite() {
        return Err(Error::NonFinite("softmax_cross_entropy".into()));
    }
    Ok((loss, dlogits))
}

/// Argmax prediction per logit row. Ties resolve to the lowest class index.
pub fn argmax_rows<F: Scalar>(logits: &Matrix<F>) -> Vec<usize> {
    (0..logits.rows())
        .map(|r| {
            let row = logits.row(r);
            let mut best = 0;
            for (c, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_logits_give_ln_2() {
        let logits = Matrix::from_vec(1, 2, vec![0.0, 0.0]).unwrap();
        let (loss, dlogits) = softmax_cross_entropy(&logits, &[0]).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((dlogits.get(0, 0) - (-0.5)).abs() < 1e-15);
        assert!((dlogits.get(0, 1) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn confident_correct_prediction_has_near_zero_loss() {
        let logits = Matrix::<f64>::from_vec(1, 2, vec![10.0, -10.0]).unwrap();
        let (loss, _) = softmax_cross_entropy(&logits, &[0]).unwrap();
        // ln(1 + e^-20) ~= 2.061e-9.
        assert!((loss - 2.0611536181902037e-9).abs() < 1e-15, "loss {loss}");
    }

    #[test]
    fn loss_is_nonnegative_and_batch_averaged() {
        let logits = Matrix::<f64>::from_vec(2, 3, vec![1.0, 2.0, -1.0, 0.5, 0.5, 0.5]).unwrap();
        let (loss, _) = softmax_cross_entropy(&logits, &[1, 2]).unwrap();
        assert!(loss >= 0.0);
        // Averaging: duplicating the batch leaves the loss unchanged.
        let doubled = Matrix::from_vec(
            4,
            3,
            vec![1.0, 2.0, -1.0, 0.5, 0.5, 0.5, 1.0, 2.0, -1.0, 0.5, 0.5, 0.5],
        )
        .unwrap();
        let (loss2, _) = softmax_cross_entropy(&doubled, &[1, 2, 1, 2]).unwrap();
        assert!((loss - loss2).abs() < 1e-15);
    }

    #[test]
    fn out_of_range_label_is_rejected() {
        let logits = Matrix::from_vec(1, 2, vec![0.0, 0.0]).unwrap();
        let err = softmax_cross_entropy(&logits, &[2]).unwrap_err();
        assert!(err.to_string().contains("label 2"), "{err}");
    }

    #[test]
    fn dlogits_match_local_finite_differences() {
        // Independent oracle: perturb each logit entry and difference the loss.
        let logits = Matrix::<f64>::from_vec(3, 4, vec![
            0.3, -1.2, 0.8, 0.1, 2.0, -0.5, 0.0, 1.1, -0.7, 0.2, 0.9, -1.5,
        ])
        .unwrap();
        let labels = [2usize, 0, 3];
        let (_, dlogits) = softmax_cross_entropy(&logits, &labels).unwrap();
        let h = 1e-6;
        for r in 0..3 {
            for c in 0..4 {
                let mut plus = logits.clone();
                plus.set(r, c, plus.get(r, c) + h);
                let mut minus = logits.clone();
                minus.set(r, c, minus.get(r, c) - h);
                let (lp, _) = softmax_cross_entropy(&plus, &labels).unwrap();
                let (lm, _) = softmax_cross_entropy(&minus, &labels).unwrap();
                let numeric = (lp - lm) / (2.0 * h);
                let analytic = dlogits.get(r, c);
                let scale = numeric.abs().max(analytic.abs()).max(1e-12);
                assert!(
                    (numeric - analytic).abs() / scale < 1e-6,
                    "({r},{c}): analytic {analytic} vs numeric {numeric}"
                );
            }
        }
    }

    #[test]
    fn argmax_breaks_ties_toward_low_index() {
        let logits = Matrix::from_vec(2, 3, vec![1.0, 1.0, 0.0, 0.0, 2.0, 2.0]).unwrap();
        assert_eq!(argmax_rows(&logits), vec![0, 1]);
    }
}
