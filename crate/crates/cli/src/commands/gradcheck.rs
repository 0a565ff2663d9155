//! `featnorm gradcheck`: analytic backward pass vs the central-difference
//! oracle on randomized model instances; any violation exits nonzero.

use std::path::Path;

use anyhow::{bail, Result};
use featnorm_core::nn::{check_random_instance, GradCheckTolerance};
use featnorm_core::rng::SplitMix64;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::manifest::RunManifest;

use super::write_json;

const STREAM_GRADCHECK: u64 = 96;

#[derive(Debug, Serialize)]
struct GradcheckSummary {
    models: usize,
    params_checked: usize,
    max_rel_error: f64,
    worst_model: usize,
    worst_param: usize,
    passed: bool,
}

pub fn run(cfg: &ExperimentConfig, out: &Path, corrupt: bool) -> Result<()> {
    let settings = &cfg.gradcheck;
    if settings.models == 0 {
        bail!("gradcheck needs [gradcheck] models >= 1");
    }
    let tolerance = GradCheckTolerance {
        rel: settings.rel_tol,
        abs_floor: settings.abs_floor,
    };
    let mut instance_seeds = SplitMix64::derive(cfg.seed, STREAM_GRADCHECK);

    let mut summary = GradcheckSummary {
        models: settings.models,
        params_checked: 0,
        max_rel_error: 0.0,
        worst_model: 0,
        worst_param: 0,
        passed: true,
    };
    for index in 0..settings.models {
        let report = check_random_instance(
            instance_seeds.next_u64(),
            settings.step,
            tolerance,
            corrupt && index == 0,
        )?;
        println!(
            "gradcheck: model {index} ({} params) max rel error {:.3e} {}",
            report.params_checked,
            report.max_rel_error,
            if report.passed { "ok" } else { "FAIL" },
        );
        summary.params_checked += report.params_checked;
        if report.max_rel_error > summary.max_rel_error {
            summary.max_rel_error = report.max_rel_error;
            summary.worst_model = index;
            summary.worst_param = report.worst_param;
        }
        summary.passed &= report.passed;
    }

    if !summary.passed {
        bail!(
            "gradient check failed: worst parameter {} of model {} at relative error {:.3e}",
            summary.worst_param,
            summary.worst_model,
            summary.max_rel_error,
        );
    }
    println!(
        "gradcheck: {} models passed, max rel error {:.3e} (parameter {} of model {})",
        summary.models, summary.max_rel_error, summary.worst_param, summary.worst_model,
    );

    write_json(out, "gradcheck.json", &summary)?;
    let mut manifest = RunManifest::new("gradcheck", cfg);
    manifest.add("report", "gradcheck.json");
    manifest.write(out)
}
