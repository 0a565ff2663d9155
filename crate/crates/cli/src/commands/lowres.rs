//! `featnorm lowres`: accuracy-vs-samples-per-class learning curve and its
//! normalized AUC, labeled by strategy so curves can be compared across runs.

use std::path::Path;

use anyhow::Result;
use featnorm_core::eval::{format_curve_csv, low_resource_curve, CurveResult};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::manifest::RunManifest;

use super::{assembly_plan, resolve_datasets, write_json, write_text};

#[derive(Debug, Serialize)]
struct LowresReport<'a> {
    strategy: &'a str,
    sizes: &'a [usize],
    repeats: usize,
    result: &'a CurveResult,
}

pub fn run(cfg: &ExperimentConfig, out: &Path, jobs: usize) -> Result<()> {
    let train_config = cfg.train_config().validated()?;
    let (emotion_data, speaker_data) = resolve_datasets(cfg)?;
    let plan = assembly_plan(cfg, &emotion_data, speaker_data.as_ref());

    let result = low_resource_curve(
        &emotion_data,
        &cfg.eval.sizes,
        cfg.eval.repeats,
        cfg.eval.ratios,
        &plan,
        &train_config,
        jobs,
    )?;

    let label = cfg.model.strategy.name();
    let csv_name = format!("curve_{label}.csv");
    let report_name = format!("lowres_{label}.json");
    write_text(out, &csv_name, &format_curve_csv(&result))?;
    write_json(
        out,
        &report_name,
        &LowresReport {
            strategy: label,
            sizes: &cfg.eval.sizes,
            repeats: cfg.eval.repeats,
            result: &result,
        },
    )?;
    for point in &result.points {
        println!("lowres: {} per class -> mean accuracy {:.4}", point.n_per_class, point.mean);
    }
    println!("lowres: strategy {label} auc {:.6}", result.auc);

    let mut manifest = RunManifest::new("lowres", cfg);
    manifest.add("curve_csv", &csv_name);
    manifest.add("report", &report_name);
    manifest.write(out)
}
