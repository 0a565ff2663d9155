use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::scalar::{encode_decimal, parse_decimal};

use super::curve::mean;
use super::{CrossValidationReport, CurvePoint, CurveResult};

/// Cross-validation results as `fold,wa` CSV.
pub fn format_cv_csv(report: &CrossValidationReport) -> String {
    let mut out = String::from("fold,wa\n");
    for fold in &report.folds {
        out.push_str(&format!("{},{}\n", fold.fold_index, encode_decimal(fold.wa)));
    }
    out
}

/// Learning-curve results as `size,seed,accuracy` CSV, one row per repeat.
pub fn format_curve_csv(curve: &CurveResult) -> String {
    let mut out = String::from("size,seed,accuracy\n");
    for point in &curve.points {
        for (seed, &accuracy) in point.accuracies.iter().enumerate() {
            out.push_str(&format!(
                "{},{seed},{}\n",
                point.n_per_class,
                encode_decimal(accuracy)
            ));
        }
    }
    out
}

/// Parses [`format_curve_csv`] output back into curve points (means
/// recomputed from the rows), so AUC can be re-derived from the flat file.
pub fn parse_curve_csv(contents: &str) -> Result<Vec<CurvePoint>> {
    let mut lines = contents.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "empty file, expected size,seed,accuracy header"))?;
    if header != "size,seed,accuracy" {
        return Err(Error::parse(1, format!("expected size,seed,accuracy header, got {header:?}")));
    }

    let mut by_size: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
    for (lineno, line) in lines {
        let lineno = lineno + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::parse(lineno, format!("expected 3 fields, got {}", fields.len())));
        }
        let size: usize = fields[0]
            .parse()
            .map_err(|_| Error::parse(lineno, format!("bad size {:?}", fields[0])))?;
        let seed: usize = fields[1]
            .parse()
            .map_err(|_| Error::parse(lineno, format!("bad seed {:?}", fields[1])))?;
        let accuracy = parse_decimal::<f64>(fields[2])
            .ok_or_else(|| Error::parse(lineno, format!("bad accuracy {:?}", fields[2])))?;
        by_size.entry(size).or_default().push((seed, accuracy));
    }

    by_size
        .into_iter()
        .map(|(n_per_class, mut rows)| {
            rows.sort_by_key(|&(seed, _)| seed);
            let accuracies: Vec<f64> = rows.into_iter().map(|(_, a)| a).collect();
            let mean = mean(&accuracies);
            Ok(CurvePoint {
                n_per_class,
                accuracies,
                mean,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::auc;

    fn sample_curve() -> CurveResult {
        let points = vec![
            CurvePoint {
                n_per_class: 4,
                accuracies: vec![0.25, 0.3121394823117842, 0.28],
                mean: mean(&[0.25, 0.3121394823117842, 0.28]),
            },
            CurvePoint {
                n_per_class: 16,
                accuracies: vec![0.5, 0.55, 0.6],
                mean: mean(&[0.5, 0.55, 0.6]),
            },
        ];
        let auc = auc(&points.iter().map(|p| (p.n_per_class as f64, p.mean)).collect::<Vec<_>>())
            .unwrap();
        CurveResult { points, auc }
    }

    #[test]
    fn curve_csv_round_trip_preserves_auc_exactly() {
        let curve = sample_curve();
        let csv = format_curve_csv(&curve);
        let points = parse_curve_csv(&csv).unwrap();
        assert_eq!(points, curve.points);
        let recomputed = auc(&points.iter().map(|p| (p.n_per_class as f64, p.mean)).collect::<Vec<_>>())
            .unwrap();
        assert!((recomputed - curve.auc).abs() < 1e-12);
        assert_eq!(recomputed, curve.auc);
    }

    #[test]
    fn cv_csv_lists_one_row_per_fold() {
        let report = CrossValidationReport {
            mode: crate::synth::SplitMode::SpeakerIndependent,
            folds: vec![
                crate::eval::FoldOutcome {
                    fold_index: 0,
                    wa: 0.75,
                    support: 40,
                    best_epoch: 3,
                },
                crate::eval::FoldOutcome {
                    fold_index: 1,
                    wa: 0.8,
                    support: 40,
                    best_epoch: 5,
                },
            ],
            mean_wa: 0.775,
            std_wa: 0.025,
        };
        let csv = format_cv_csv(&report);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "fold,wa");
        assert!(lines[1].starts_with("0,"));
        assert!(lines[2].starts_with("1,"));
    }

    #[test]
    fn malformed_curve_rows_report_lines() {
        let err = parse_curve_csv("size,seed,accuracy\n4,0,oops\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        let err = parse_curve_csv("size,accuracy\n").unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
    }
}
