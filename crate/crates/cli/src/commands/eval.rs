//! `featnorm eval`: cross-validated evaluation in the configured split mode.

use std::path::Path;

use anyhow::Result;
use featnorm_core::eval::{cross_validate, format_cv_csv, EvalProtocol};

use crate::config::ExperimentConfig;
use crate::manifest::RunManifest;

use super::{assembly_plan, resolve_datasets, write_json, write_text};

pub fn run(cfg: &ExperimentConfig, out: &Path, jobs: usize) -> Result<()> {
    let train_config = cfg.train_config().validated()?;
    let (emotion_data, speaker_data) = resolve_datasets(cfg)?;
    let plan = assembly_plan(cfg, &emotion_data, speaker_data.as_ref());
    let protocol = EvalProtocol {
        mode: cfg.eval.mode,
        k_folds: cfg.eval.k_folds,
        validation_fraction: cfg.eval.validation_fraction,
        ratios: cfg.eval.ratios,
    };

    let report = cross_validate(&emotion_data, speaker_data.as_ref(), &plan, &train_config, &protocol, jobs)?;
    write_json(out, "cv_report.json", &report)?;
    write_text(out, "folds.csv", &format_cv_csv(&report))?;
    for fold in &report.folds {
        println!(
            "eval: fold {} wa {:.4} over {} records (best epoch {})",
            fold.fold_index, fold.wa, fold.support, fold.best_epoch,
        );
    }
    println!(
        "eval: {:?} mean wa {:.4} (std {:.4}) across {} folds",
        report.mode,
        report.mean_wa,
        report.std_wa,
        report.folds.len(),
    );

    let mut manifest = RunManifest::new("eval", cfg);
    manifest.add("report", "cv_report.json");
    manifest.add("folds_csv", "folds.csv");
    manifest.write(out)
}
