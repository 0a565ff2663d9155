//! `featnorm`: deterministic adversarial feature-normalization experiments.
//!
//! Every command maps (config file, flags, referenced input files) to output
//! files; rerunning with identical inputs reproduces identical bytes.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "featnorm",
    version,
    about = "Adversarial speaker-feature normalization experiments",
    after_help = "Any --section.key=value argument overrides the matching config entry.\n\
                  FEATNORM_SEED overrides the master seed."
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Args)]
struct Common {
    /// INI experiment config; built-in defaults apply where omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory for this run (overrides `[run] out`).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker pool size for fold/seed/point fan-out.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Generate the configured synthetic dataset as CSV.
    GenData(Common),
    /// Train one model; write the report plus best and final snapshots.
    Train(Common),
    /// Cross-validated evaluation in the configured split mode.
    Eval(Common),
    /// Speaker-ID probes over frozen model snapshots.
    Probe {
        #[command(flatten)]
        common: Common,
        /// Model snapshot to probe; repeat for a side-by-side comparison.
        #[arg(long = "snapshot", value_name = "PATH")]
        snapshots: Vec<PathBuf>,
    },
    /// Learning curve over training-set sizes plus its normalized AUC.
    Lowres(Common),
    /// Check the backward pass against finite differences on random models.
    Gradcheck {
        #[command(flatten)]
        common: Common,
        /// Perturb one analytic gradient first (detector sanity check).
        #[arg(long, hide = true)]
        corrupt: bool,
    },
}

/// True for `--section.key=value` tokens, which are config overrides rather
/// than flags of the command itself.
fn is_override(arg: &str) -> bool {
    let Some(body) = arg.strip_prefix("--") else {
        return false;
    };
    match (body.find('.'), body.find('=')) {
        (Some(dot), Some(eq)) => dot < eq,
        _ => false,
    }
}

fn run(cli: Cli, overrides: &[String]) -> Result<()> {
    let (name, common, snapshots, corrupt) = match &cli.command {
        Cmd::GenData(common) => ("gen-data", common, None, false),
        Cmd::Train(common) => ("train", common, None, false),
        Cmd::Eval(common) => ("eval", common, None, false),
        Cmd::Probe { common, snapshots } => ("probe", common, Some(snapshots.clone()), false),
        Cmd::Lowres(common) => ("lowres", common, None, false),
        Cmd::Gradcheck { common, corrupt } => ("gradcheck", common, None, *corrupt),
    };
    if common.jobs == 0 {
        anyhow::bail!("--jobs must be at least 1");
    }

    let cfg = config::load(common.config.as_deref(), overrides, common.out.as_deref())?;
    let out = cfg
        .out_dir
        .clone()
        .context("no output directory: pass --out DIR or set [run] out")?;
    std::fs::create_dir_all(&out).with_context(|| format!("creating output directory {}", out.display()))?;

    match name {
        "gen-data" => commands::gen_data::run(&cfg, &out),
        "train" => commands::train::run(&cfg, &out),
        "eval" => commands::eval::run(&cfg, &out, common.jobs),
        "probe" => commands::probe::run(&cfg, &out, &snapshots.unwrap_or_default()),
        "lowres" => commands::lowres::run(&cfg, &out, common.jobs),
        "gradcheck" => commands::gradcheck::run(&cfg, &out, corrupt),
        other => unreachable!("unhandled command {other}"),
    }
}

fn main() -> ExitCode {
    let (overrides, args): (Vec<String>, Vec<String>) = std::env::args().partition(|arg| is_override(arg));
    let cli = Cli::parse_from(args);
    match run(cli, &overrides) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("featnorm: {err:#}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn override_tokens_are_recognized() {
        assert!(is_override("--train.eta=0.1"));
        assert!(is_override("--data.emotion_csv=a.csv"));
        assert!(!is_override("--config=run.ini"));
        assert!(!is_override("--jobs=4"));
        assert!(!is_override("train.eta=0.1"));
        assert!(!is_override("--out=some.dir/x"));
    }
}
