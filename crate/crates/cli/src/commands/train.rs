//! `featnorm train`: one training run; writes the report and the best and
//! final snapshots.

use std::path::Path;

use anyhow::Result;
use featnorm_core::synth::split_speaker_dependent;
use featnorm_core::train::{save_assembly, train};

use crate::config::ExperimentConfig;
use crate::manifest::RunManifest;

use super::{assembly_plan, resolve_datasets, write_json};

pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let train_config = cfg.train_config().validated()?;
    let (emotion_data, speaker_data) = resolve_datasets(cfg)?;
    let plan = assembly_plan(cfg, &emotion_data, speaker_data.as_ref());

    // A single run trains against one random utterance-level split; the
    // cross-validated protocols live under `eval`.
    let split = split_speaker_dependent(&emotion_data, cfg.eval.ratios, cfg.seed)?;
    let speaker_data = match speaker_data {
        Some(data) => data,
        None => {
            let mut pool = split.train.clone();
            pool.extend_from_slice(&split.validation);
            pool.sort_unstable();
            emotion_data.subset(&pool)?
        }
    };

    let mut model = plan.build(cfg.seed)?;
    let report = train(&mut model, &emotion_data, &split, &speaker_data, &train_config)?;

    save_assembly(&report.best_model, &out.join("best.model"))?;
    save_assembly(&model, &out.join("final.model"))?;
    write_json(out, "report.json", &report)?;
    println!(
        "train: strategy {} best epoch {} validation wa {:.4} ({} emotion steps, {} speaker steps)",
        train_config.strategy, report.best_epoch, report.best_validation_wa, report.emotion_steps, report.speaker_steps,
    );

    let mut manifest = RunManifest::new("train", cfg);
    manifest.add("report", "report.json");
    manifest.add("best_model", "best.model");
    manifest.add("final_model", "final.model");
    manifest.write(out)
}
