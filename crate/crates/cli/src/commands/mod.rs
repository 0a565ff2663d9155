//! Command implementations. Each command is a pure function of the resolved
//! configuration and its referenced input files: all randomness derives from
//! the master seed, and only the orchestrating thread writes files, after
//! worker fan-out (if any) has joined.

pub mod eval;
pub mod gen_data;
pub mod gradcheck;
pub mod lowres;
pub mod probe;
pub mod train;

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use featnorm_core::synth::{load_csv, Dataset};
use featnorm_core::train::AssemblyPlan;

use crate::config::{DataSource, ExperimentConfig};

/// Materializes the emotion dataset and, when configured, a separate speaker
/// dataset. The synthetic source and the single-CSV case carry both label
/// columns in one dataset.
fn resolve_datasets(cfg: &ExperimentConfig) -> Result<(Dataset, Option<Dataset>)> {
    match &cfg.data {
        DataSource::Synth(spec) => Ok((featnorm_core::synth::generate(spec)?, None)),
        DataSource::Csv { emotion, speaker } => {
            let emotion_data =
                load_csv(emotion).with_context(|| format!("loading emotion dataset {}", emotion.display()))?;
            let speaker_data = match speaker {
                None => None,
                Some(path) => {
                    Some(load_csv(path).with_context(|| format!("loading speaker dataset {}", path.display()))?)
                }
            };
            Ok((emotion_data, speaker_data))
        }
    }
}

/// The model recipe implied by the configuration and the dataset's
/// cardinalities.
fn assembly_plan(cfg: &ExperimentConfig, emotion_data: &Dataset, speaker_data: Option<&Dataset>) -> AssemblyPlan {
    let n_speakers = speaker_data.unwrap_or(emotion_data).n_speakers();
    AssemblyPlan {
        upstream_dims: cfg.model.upstream_dims.clone(),
        upstream_activation: cfg.model.activation,
        ..AssemblyPlan::new(
            emotion_data.feature_dim(),
            emotion_data.n_emotions(),
            n_speakers,
            cfg.model.strategy,
        )
    }
}

fn write_text(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: serde::Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let body = serde_json::to_string_pretty(value).with_context(|| format!("serializing {name}"))? + "\n";
    write_text(dir, name, &body)
}
