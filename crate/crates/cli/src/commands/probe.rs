//! `featnorm probe`: speaker-ID probes over frozen model snapshots, reported
//! side by side.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use featnorm_core::eval::{probe_speaker_id, Metric, ProbeConfig};
use featnorm_core::scalar::encode_decimal;
use featnorm_core::train::load_assembly;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::manifest::RunManifest;

use super::{resolve_datasets, write_json, write_text};

#[derive(Debug, Serialize)]
struct ProbeRow {
    snapshot: String,
    metric: Metric,
}

pub fn run(cfg: &ExperimentConfig, out: &Path, snapshots: &[PathBuf]) -> Result<()> {
    if snapshots.is_empty() {
        bail!("probe needs at least one --snapshot PATH");
    }
    let (emotion_data, speaker_data) = resolve_datasets(cfg)?;
    let data = speaker_data.unwrap_or(emotion_data);
    // One shared probe configuration, so the only thing that differs between
    // rows is the snapshot itself.
    let probe_config = ProbeConfig {
        eta: cfg.probe.eta,
        epochs: cfg.probe.epochs,
        batch_size: cfg.probe.batch_size,
        train_fraction: cfg.probe.train_fraction,
        seed: cfg.seed,
    };

    let mut rows = Vec::with_capacity(snapshots.len());
    for path in snapshots {
        let label = path.display().to_string();
        if label.contains(',') {
            bail!("snapshot path {label:?} contains a comma, which the probe CSV cannot hold");
        }
        let assembly = load_assembly(path).with_context(|| format!("loading snapshot {label}"))?;
        let metric = probe_speaker_id(assembly.upstream(), assembly.projector(), &data, &probe_config)
            .with_context(|| format!("probing snapshot {label}"))?;
        rows.push(ProbeRow { snapshot: label, metric });
    }

    let width = rows.iter().map(|r| r.snapshot.len()).max().unwrap_or(8).max("snapshot".len());
    println!("{:width$}  {:>14}  {:>7}", "snapshot", "probe_accuracy", "support");
    for row in &rows {
        println!(
            "{:width$}  {:>14.4}  {:>7}",
            row.snapshot, row.metric.value, row.metric.support,
        );
    }

    let mut csv = String::from("snapshot,probe_accuracy,support\n");
    for row in &rows {
        csv.push_str(&format!(
            "{},{},{}\n",
            row.snapshot,
            encode_decimal(row.metric.value),
            row.metric.support
        ));
    }
    write_text(out, "probe.csv", &csv)?;
    write_json(out, "probe_report.json", &rows)?;

    let mut manifest = RunManifest::new("probe", cfg);
    manifest.add("report", "probe_report.json");
    manifest.add("probe_csv", "probe.csv");
    manifest.write(out)
}
