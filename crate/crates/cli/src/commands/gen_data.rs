//! `featnorm gen-data`: write the configured synthetic dataset as CSV.

use std::path::Path;

use anyhow::{bail, Result};
use featnorm_core::synth::{generate, save_csv};

use crate::config::{DataSource, ExperimentConfig};
use crate::manifest::RunManifest;

pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let spec = match &cfg.data {
        DataSource::Synth(spec) => spec,
        DataSource::Csv { .. } => bail!("gen-data needs a synthetic data source ([data] source=synth)"),
    };
    let dataset = generate(spec)?;
    save_csv(&dataset, &out.join("dataset.csv"))?;
    println!(
        "gen-data: wrote {} records ({} speakers x {} emotions, dim {}) to {}",
        dataset.len(),
        dataset.n_speakers(),
        dataset.n_emotions(),
        dataset.feature_dim(),
        out.join("dataset.csv").display(),
    );

    let mut manifest = RunManifest::new("gen-data", cfg);
    manifest.add("dataset_csv", "dataset.csv");
    manifest.add("dataset_meta", "dataset.meta");
    manifest.write(out)
}
