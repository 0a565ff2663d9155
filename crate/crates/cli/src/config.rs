//! Experiment configuration: built-in defaults, an INI-style config file,
//! `--section.key=value` flag overrides, and the `FEATNORM_SEED` environment
//! variable, resolved in that order into one typed [`ExperimentConfig`].

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use featnorm_core::nn::Activation;
use featnorm_core::synth::{SplitMode, SynthSpec};
use featnorm_core::train::{Strategy, TrainConfig};

/// Raw sectioned key/value view of a config, also used as the manifest echo.
pub type Ini = BTreeMap<String, BTreeMap<String, String>>;

/// Every known key with its default; `None` means the key is optional and
/// has no value unless the user supplies one.
const SCHEMA: &[(&str, &[(&str, Option<&str>)])] = &[
    ("run", &[("seed", Some("42")), ("out", None)]),
    (
        "data",
        &[
            ("source", Some("synth")),
            ("n_speakers", Some("10")),
            ("n_emotions", Some("4")),
            ("feature_dim", Some("32")),
            ("samples_per_speaker", Some("200")),
            ("speaker_scale", Some("3.0")),
            ("emotion_scale", Some("2.0")),
            ("noise_std", Some("1.0")),
            ("bias_rho", Some("0.9")),
            ("preference_permutation_seed", None),
            ("speaker_space_rank", Some("3")),
            ("emotion_csv", None),
            ("speaker_csv", None),
        ],
    ),
    (
        "model",
        &[
            ("upstream_dims", Some("64,32")),
            ("activation", Some("relu")),
            ("strategy", Some("baseline")),
            ("projector", Some("auto")),
        ],
    ),
    (
        "train",
        &[
            ("eta", Some("0.05")),
            ("lambda", Some("0.001")),
            ("epochs", Some("50")),
            ("batch_size", Some("32")),
            ("speaker_steps_per_emotion_step", Some("1")),
        ],
    ),
    (
        "eval",
        &[
            ("mode", Some("speaker_independent")),
            ("k_folds", Some("5")),
            ("validation_fraction", Some("0.2")),
            ("ratios", Some("0.8,0.1,0.1")),
            ("sizes", Some("4,8,16,32,64,128")),
            ("repeats", Some("5")),
        ],
    ),
    (
        "probe",
        &[
            ("eta", Some("0.05")),
            ("epochs", Some("30")),
            ("batch_size", Some("32")),
            ("train_fraction", Some("0.8")),
        ],
    ),
    (
        "gradcheck",
        &[
            ("models", Some("20")),
            ("step", Some("1e-5")),
            ("rel_tol", Some("1e-4")),
            ("abs_floor", Some("1e-7")),
        ],
    ),
];

fn schema_entry(section: &str, key: &str) -> Option<Option<&'static str>> {
    SCHEMA
        .iter()
        .find(|(name, _)| *name == section)
        .and_then(|(_, keys)| keys.iter().find(|(name, _)| *name == key))
        .map(|(_, default)| *default)
}

/// Where the emotion and speaker records come from. With a single CSV (or the
/// synthetic generator) the one dataset carries both label columns; a second
/// CSV supplies the speaker task separately.
#[derive(Debug, Clone)]
pub enum DataSource {
    Synth(SynthSpec),
    Csv {
        emotion: PathBuf,
        speaker: Option<PathBuf>,
    },
}

#[derive(Debug, Clone)]
pub struct ModelSettings {
    pub upstream_dims: Vec<usize>,
    pub activation: Activation,
    pub strategy: Strategy,
}

#[derive(Debug, Clone)]
pub struct TrainSettings {
    pub eta: f64,
    pub lambda: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub speaker_steps_per_emotion_step: usize,
}

#[derive(Debug, Clone)]
pub struct EvalSettings {
    pub mode: SplitMode,
    pub k_folds: usize,
    pub validation_fraction: f64,
    pub ratios: (f64, f64, f64),
    pub sizes: Vec<usize>,
    pub repeats: usize,
}

#[derive(Debug, Clone)]
pub struct ProbeSettings {
    pub eta: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub train_fraction: f64,
}

#[derive(Debug, Clone)]
pub struct GradcheckSettings {
    pub models: usize,
    pub step: f64,
    pub rel_tol: f64,
    pub abs_floor: f64,
}

/// Fully resolved configuration for one command run.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Output directory; commands require it via `--out` or `[run] out`.
    pub out_dir: Option<PathBuf>,
    pub data: DataSource,
    pub model: ModelSettings,
    pub train: TrainSettings,
    pub eval: EvalSettings,
    pub probe: ProbeSettings,
    pub gradcheck: GradcheckSettings,
    echo: Ini,
}

impl ExperimentConfig {
    /// Effective key/value view for the run manifest. Inactive data-source
    /// keys and the output directory are left out: the manifest lives inside
    /// the output directory and records only what shaped the results.
    pub fn echo(&self) -> &Ini {
        &self.echo
    }

    /// The core training configuration, seeded with the master seed.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            eta: self.train.eta,
            lambda: self.train.lambda,
            strategy: self.model.strategy,
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            speaker_steps_per_emotion_step: self.train.speaker_steps_per_emotion_step,
            seed: self.seed,
        }
    }
}

/// Parses INI text: `[section]` headers, `key = value` lines, `#`/`;`
/// comments. Duplicate keys within a section are rejected.
fn parse_ini(text: &str) -> Result<Ini> {
    let mut sections = Ini::new();
    let mut current: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| anyhow!("line {line_no}: unterminated section header {line:?}"))?
                .trim();
            if name.is_empty() {
                bail!("line {line_no}: empty section name");
            }
            sections.entry(name.to_string()).or_default();
            current = Some(name.to_string());
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {line_no}: expected key=value, got {line:?}"))?;
        let section = current
            .clone()
            .ok_or_else(|| anyhow!("line {line_no}: key {:?} appears before any [section]", key.trim()))?;
        let previous = sections
            .get_mut(&section)
            .expect("current section was inserted")
            .insert(key.trim().to_string(), value.trim().to_string());
        if previous.is_some() {
            bail!("line {line_no}: duplicate key {}.{}", section, key.trim());
        }
    }
    Ok(sections)
}

fn check_known(origin: &str, sections: &Ini) -> Result<()> {
    for (section, keys) in sections {
        for key in keys.keys() {
            if schema_entry(section, key).is_none() {
                bail!("{origin}: unknown config key [{section}] {key}");
            }
        }
    }
    Ok(())
}

/// Splits one `--section.key=value` (leading dashes optional) override token.
fn parse_override(token: &str) -> Result<(String, String, String)> {
    let body = token.strip_prefix("--").unwrap_or(token);
    let (path, value) = body
        .split_once('=')
        .ok_or_else(|| anyhow!("override {token:?} is not of the form --section.key=value"))?;
    let (section, key) = path
        .split_once('.')
        .ok_or_else(|| anyhow!("override {token:?} is not of the form --section.key=value"))?;
    Ok((section.to_string(), key.to_string(), value.to_string()))
}

struct Lookup {
    user: Ini,
}

impl Lookup {
    fn get(&self, section: &str, key: &str) -> Option<String> {
        if let Some(value) = self.user.get(section).and_then(|keys| keys.get(key)) {
            return Some(value.clone());
        }
        schema_entry(section, key).flatten().map(str::to_string)
    }

    fn user_set(&self, section: &str, key: &str) -> bool {
        self.user.get(section).is_some_and(|keys| keys.contains_key(key))
    }

    fn parse<T: FromStr>(&self, section: &str, key: &str) -> Result<T>
    where
        T::Err: Display,
    {
        let raw = self
            .get(section, key)
            .ok_or_else(|| anyhow!("config: [{section}] {key} is required"))?;
        raw.parse()
            .map_err(|err| anyhow!("config: [{section}] {key}: invalid value {raw:?} ({err})"))
    }

    fn parse_opt<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        match self.get(section, key) {
            // The literal "none" clears an optional key that has a non-empty
            // default (e.g. data.speaker_space_rank).
            None => Ok(None),
            Some(raw) if raw.eq_ignore_ascii_case("none") => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|err| anyhow!("config: [{section}] {key}: invalid value {raw:?} ({err})")),
        }
    }

    fn parse_list(&self, section: &str, key: &str) -> Result<Vec<usize>> {
        let raw = self
            .get(section, key)
            .ok_or_else(|| anyhow!("config: [{section}] {key} is required"))?;
        raw.split(',')
            .map(|part| {
                part.trim()
                    .parse()
                    .map_err(|err| anyhow!("config: [{section}] {key}: invalid entry {:?} ({err})", part.trim()))
            })
            .collect()
    }

    fn parse_ratios(&self, section: &str, key: &str) -> Result<(f64, f64, f64)> {
        let raw = self
            .get(section, key)
            .ok_or_else(|| anyhow!("config: [{section}] {key} is required"))?;
        let parts: Vec<f64> = raw
            .split(',')
            .map(|part| {
                part.trim()
                    .parse()
                    .map_err(|err| anyhow!("config: [{section}] {key}: invalid entry {:?} ({err})", part.trim()))
            })
            .collect::<Result<_>>()?;
        if parts.len() != 3 {
            bail!("config: [{section}] {key} needs exactly 3 comma-separated ratios, got {}", parts.len());
        }
        Ok((parts[0], parts[1], parts[2]))
    }
}

fn parse_activation(raw: &str) -> Result<Activation> {
    match raw.to_ascii_lowercase().as_str() {
        "relu" => Ok(Activation::Relu),
        "tanh" => Ok(Activation::Tanh),
        "identity" => Ok(Activation::Identity),
        other => bail!("config: [model] activation: unknown activation {other:?} (expected relu, tanh, or identity)"),
    }
}

fn parse_mode(raw: &str) -> Result<SplitMode> {
    match raw.to_ascii_lowercase().as_str() {
        "speaker_independent" => Ok(SplitMode::SpeakerIndependent),
        "speaker_dependent" => Ok(SplitMode::SpeakerDependent),
        other => bail!(
            "config: [eval] mode: unknown mode {other:?} (expected speaker_independent or speaker_dependent)"
        ),
    }
}

/// Loads and validates the configuration for one run.
///
/// Precedence, lowest to highest: built-in defaults, the `--config` file,
/// `--section.key=value` overrides, then `FEATNORM_SEED` for the master seed
/// and `--out` for the output directory.
pub fn load(config_path: Option<&Path>, overrides: &[String], out_flag: Option<&Path>) -> Result<ExperimentConfig> {
    let mut user = match config_path {
        None => Ini::new(),
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            let parsed = parse_ini(&text).with_context(|| format!("parsing config {}", path.display()))?;
            check_known(&path.display().to_string(), &parsed)?;
            parsed
        }
    };

    for token in overrides {
        let (section, key, value) = parse_override(token)?;
        if schema_entry(&section, &key).is_none() {
            bail!("override {token:?}: unknown config key [{section}] {key}");
        }
        user.entry(section).or_default().insert(key, value);
    }

    if let Ok(raw) = std::env::var("FEATNORM_SEED") {
        let seed: u64 = raw
            .parse()
            .map_err(|err| anyhow!("FEATNORM_SEED: invalid seed {raw:?} ({err})"))?;
        user.entry("run".to_string()).or_default().insert("seed".to_string(), seed.to_string());
    }

    let lookup = Lookup { user };
    let seed: u64 = lookup.parse("run", "seed")?;

    let out_dir = match out_flag {
        Some(path) => Some(path.to_path_buf()),
        None => lookup.get("run", "out").map(PathBuf::from),
    };

    let source = lookup.get("data", "source").expect("source has a default");
    let data = match source.as_str() {
        "synth" => {
            for key in ["emotion_csv", "speaker_csv"] {
                if lookup.user_set("data", key) {
                    bail!("config: [data] {key} conflicts with source=synth; a task has exactly one data source");
                }
            }
            DataSource::Synth(SynthSpec {
                n_speakers: lookup.parse("data", "n_speakers")?,
                n_emotions: lookup.parse("data", "n_emotions")?,
                feature_dim: lookup.parse("data", "feature_dim")?,
                speaker_scale: lookup.parse("data", "speaker_scale")?,
                emotion_scale: lookup.parse("data", "emotion_scale")?,
                noise_std: lookup.parse("data", "noise_std")?,
                bias_rho: lookup.parse("data", "bias_rho")?,
                samples_per_speaker: lookup.parse("data", "samples_per_speaker")?,
                seed,
                preference_permutation_seed: lookup.parse_opt("data", "preference_permutation_seed")?,
                speaker_space_rank: lookup.parse_opt("data", "speaker_space_rank")?,
            })
        }
        "csv" => {
            for (key, _) in SCHEMA.iter().find(|(name, _)| *name == "data").expect("data section").1 {
                let synth_only = !matches!(*key, "source" | "emotion_csv" | "speaker_csv");
                if synth_only && lookup.user_set("data", key) {
                    bail!("config: [data] {key} conflicts with source=csv; a task has exactly one data source");
                }
            }
            let emotion = PathBuf::from(
                lookup
                    .get("data", "emotion_csv")
                    .ok_or_else(|| anyhow!("config: [data] emotion_csv is required when source=csv"))?,
            );
            let speaker = lookup.get("data", "speaker_csv").map(PathBuf::from);
            for path in std::iter::once(&emotion).chain(speaker.as_ref()) {
                fs::metadata(path).with_context(|| format!("config: [data] referenced file {}", path.display()))?;
            }
            DataSource::Csv { emotion, speaker }
        }
        other => bail!("config: [data] source: unknown source {other:?} (expected synth or csv)"),
    };

    let strategy: Strategy = lookup.parse("model", "strategy")?;
    let projector = lookup.get("model", "projector").expect("projector has a default");
    match (projector.as_str(), strategy) {
        ("auto", _) => {}
        ("gate", Strategy::Snp) => {}
        ("none", Strategy::Tap | Strategy::Baseline) => {}
        ("gate", other) => bail!("config: [model] projector=gate requires strategy snp, got {other}"),
        ("none", Strategy::Snp) => {
            bail!("config: [model] projector=none conflicts with strategy snp, which trains the projector")
        }
        (other, _) => bail!("config: [model] projector: unknown value {other:?} (expected auto, gate, or none)"),
    }

    let model = ModelSettings {
        upstream_dims: lookup.parse_list("model", "upstream_dims")?,
        activation: parse_activation(&lookup.get("model", "activation").expect("activation has a default"))?,
        strategy,
    };

    let train = TrainSettings {
        eta: lookup.parse("train", "eta")?,
        lambda: lookup.parse("train", "lambda")?,
        epochs: lookup.parse("train", "epochs")?,
        batch_size: lookup.parse("train", "batch_size")?,
        speaker_steps_per_emotion_step: lookup.parse("train", "speaker_steps_per_emotion_step")?,
    };

    let eval = EvalSettings {
        mode: parse_mode(&lookup.get("eval", "mode").expect("mode has a default"))?,
        k_folds: lookup.parse("eval", "k_folds")?,
        validation_fraction: lookup.parse("eval", "validation_fraction")?,
        ratios: lookup.parse_ratios("eval", "ratios")?,
        sizes: lookup.parse_list("eval", "sizes")?,
        repeats: lookup.parse("eval", "repeats")?,
    };

    let probe = ProbeSettings {
        eta: lookup.parse("probe", "eta")?,
        epochs: lookup.parse("probe", "epochs")?,
        batch_size: lookup.parse("probe", "batch_size")?,
        train_fraction: lookup.parse("probe", "train_fraction")?,
    };

    let gradcheck = GradcheckSettings {
        models: lookup.parse("gradcheck", "models")?,
        step: lookup.parse("gradcheck", "step")?,
        rel_tol: lookup.parse("gradcheck", "rel_tol")?,
        abs_floor: lookup.parse("gradcheck", "abs_floor")?,
    };

    let mut echo = Ini::new();
    for (section, keys) in SCHEMA {
        for (key, _) in *keys {
            if *section == "run" && *key == "out" {
                continue;
            }
            let inactive = match source.as_str() {
                "synth" => matches!(*key, "emotion_csv" | "speaker_csv"),
                _ => {
                    *section == "data" && !matches!(*key, "source" | "emotion_csv" | "speaker_csv")
                }
            };
            if inactive {
                continue;
            }
            if *section == "run" && *key == "seed" {
                echo.entry("run".into()).or_default().insert("seed".into(), seed.to_string());
                continue;
            }
            if let Some(value) = lookup.get(section, key) {
                echo.entry(section.to_string()).or_default().insert(key.to_string(), value);
            }
        }
    }

    Ok(ExperimentConfig {
        seed,
        out_dir,
        data,
        model,
        train,
        eval,
        probe,
        gradcheck,
        echo,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn write_config(contents: &str) -> tempfile::NamedTempFile {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        file.write_all(contents.as_bytes()).unwrap();
        file.flush().unwrap();
        file
    }

    #[test]
    fn defaults_match_the_documented_experiment_constants() {
        let cfg = load(None, &[], None).unwrap();
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.train.batch_size, 32);
        assert_eq!(cfg.train.epochs, 50);
        assert_eq!(cfg.train.eta, 0.05);
        assert_eq!(cfg.train.lambda, 0.001);
        assert_eq!(cfg.model.upstream_dims, vec![64, 32]);
        assert_eq!(cfg.eval.k_folds, 5);
        assert_eq!(cfg.eval.sizes, vec![4, 8, 16, 32, 64, 128]);
        assert_eq!(cfg.eval.repeats, 5);
        match &cfg.data {
            DataSource::Synth(spec) => {
                assert_eq!(spec.n_speakers, 10);
                assert_eq!(spec.n_emotions, 4);
                assert_eq!(spec.feature_dim, 32);
                assert_eq!(spec.bias_rho, 0.9);
                assert_eq!(spec.noise_std, 1.0);
                assert_eq!(spec.samples_per_speaker, 200);
                assert_eq!(spec.seed, 42);
            }
            other => panic!("expected synth default, got {other:?}"),
        }
    }

    #[test]
    fn file_values_override_defaults_and_flags_override_the_file() {
        let file = write_config("[train]\neta = 0.1\nepochs = 7\n");
        let cfg = load(Some(file.path()), &[], None).unwrap();
        assert_eq!(cfg.train.eta, 0.1);
        assert_eq!(cfg.train.epochs, 7);

        let overrides = vec!["--train.eta=0.2".to_string()];
        let cfg = load(Some(file.path()), &overrides, None).unwrap();
        assert_eq!(cfg.train.eta, 0.2);
        assert_eq!(cfg.train.epochs, 7);
        assert_eq!(cfg.echo()["train"]["eta"], "0.2");
    }

    #[test]
    fn unknown_keys_are_rejected_everywhere() {
        let file = write_config("[train]\nmomentum = 0.9\n");
        let err = load(Some(file.path()), &[], None).unwrap_err().to_string();
        assert!(err.contains("unknown config key [train] momentum"), "{err}");

        let overrides = vec!["--train.momentum=0.9".to_string()];
        let err = load(None, &overrides, None).unwrap_err().to_string();
        assert!(err.contains("unknown config key [train] momentum"), "{err}");
    }

    #[test]
    fn duplicate_keys_in_a_file_are_rejected() {
        let file = write_config("[train]\neta = 0.1\neta = 0.2\n");
        let err = format!("{:#}", load(Some(file.path()), &[], None).unwrap_err());
        assert!(err.contains("duplicate key train.eta"), "{err}");
    }

    #[test]
    fn projector_strategy_conflicts_are_validation_errors() {
        let overrides = vec!["--model.strategy=snp".to_string(), "--model.projector=none".to_string()];
        let err = load(None, &overrides, None).unwrap_err().to_string();
        assert!(err.contains("projector=none conflicts with strategy snp"), "{err}");

        let overrides = vec!["--model.projector=gate".to_string()];
        let err = load(None, &overrides, None).unwrap_err().to_string();
        assert!(err.contains("projector=gate requires strategy snp"), "{err}");
    }

    #[test]
    fn each_task_has_exactly_one_data_source() {
        let overrides = vec!["--data.emotion_csv=somewhere.csv".to_string()];
        let err = load(None, &overrides, None).unwrap_err().to_string();
        assert!(err.contains("conflicts with source=synth"), "{err}");

        let overrides = vec!["--data.source=csv".to_string(), "--data.n_speakers=3".to_string()];
        let err = load(None, &overrides, None).unwrap_err().to_string();
        assert!(err.contains("conflicts with source=csv"), "{err}");
    }

    #[test]
    fn csv_source_requires_existing_files() {
        let overrides = vec![
            "--data.source=csv".to_string(),
            "--data.emotion_csv=/nonexistent/data.csv".to_string(),
        ];
        let err = format!("{:#}", load(None, &overrides, None).unwrap_err());
        assert!(err.contains("/nonexistent/data.csv"), "{err}");
    }

    #[test]
    fn the_echo_skips_inactive_source_keys_and_the_output_dir() {
        let cfg = load(None, &[], Some(Path::new("/tmp/somewhere"))).unwrap();
        let echo = cfg.echo();
        assert!(!echo["data"].contains_key("emotion_csv"));
        assert!(!echo["run"].contains_key("out"));
        assert_eq!(echo["data"]["n_speakers"], "10");
        assert_eq!(echo["model"]["strategy"], "baseline");
    }

    #[test]
    fn malformed_overrides_are_rejected() {
        let err = load(None, &["--train.eta".to_string()], None).unwrap_err().to_string();
        assert!(err.contains("not of the form"), "{err}");
        let err = load(None, &["--eta=0.1".to_string()], None).unwrap_err().to_string();
        assert!(err.contains("not of the form"), "{err}");
    }
}
