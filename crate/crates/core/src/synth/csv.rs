use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::{encode_decimal, parse_decimal};

use super::{Dataset, Record, SynthSpec};

/// Sidecar path for a dataset file: same stem, `.meta` extension.
fn meta_path(path: &Path) -> std::path::PathBuf {
    path.with_extension("meta")
}

fn format_meta(dataset: &Dataset) -> String {
    let mut out = String::new();
    out.push_str(&format!("n_speakers={}\n", dataset.n_speakers()));
    out.push_str(&format!("n_emotions={}\n", dataset.n_emotions()));
    out.push_str(&format!("feature_dim={}\n", dataset.feature_dim()));
    out.push_str(&format!("n_records={}\n", dataset.len()));
    if let Some(spec) = dataset.source_spec() {
        out.push_str(&format!("spec.n_speakers={}\n", spec.n_speakers));
        out.push_str(&format!("spec.n_emotions={}\n", spec.n_emotions));
        out.push_str(&format!("spec.feature_dim={}\n", spec.feature_dim));
        out.push_str(&format!("spec.speaker_scale={}\n", encode_decimal(spec.speaker_scale)));
        out.push_str(&format!("spec.emotion_scale={}\n", encode_decimal(spec.emotion_scale)));
        out.push_str(&format!("spec.noise_std={}\n", encode_decimal(spec.noise_std)));
        out.push_str(&format!("spec.bias_rho={}\n", encode_decimal(spec.bias_rho)));
        out.push_str(&format!("spec.samples_per_speaker={}\n", spec.samples_per_speaker));
        out.push_str(&format!("spec.seed={}\n", spec.seed));
        if let Some(pseed) = spec.preference_permutation_seed {
            out.push_str(&format!("spec.preference_permutation_seed={pseed}\n"));
        }
        if let Some(rank) = spec.speaker_space_rank {
            out.push_str(&format!("spec.speaker_space_rank={rank}\n"));
        }
    }
    out
}

/// Writes `dataset` as CSV (`id,speaker,emotion,f0,...`) plus a `.meta`
/// sidecar holding the label cardinalities and, when the dataset came from
/// the generator, the generator parameters.
pub fn save_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str("id,speaker,emotion");
    for i in 0..dataset.feature_dim() {
        out.push_str(&format!(",f{i}"));
    }
    out.push('\n');
    for record in dataset.records() {
        if record.id.contains(',') || record.id.contains('\n') {
            return Err(Error::invalid(format!(
                "utterance id {:?} contains a CSV delimiter",
                record.id
            )));
        }
        out.push_str(&record.id);
        out.push_str(&format!(",{},{}", record.speaker, record.emotion));
        for &v in &record.features {
            out.push(',');
            out.push_str(&encode_decimal(v));
        }
        out.push('\n');
    }

    let write = |p: &Path, contents: &str| -> Result<()> {
        let mut file = fs::File::create(p).map_err(|e| Error::io(p, e))?;
        file.write_all(contents.as_bytes()).map_err(|e| Error::io(p, e))
    };
    write(path, &out)?;
    write(&meta_path(path), &format_meta(dataset))
}

fn parse_meta(contents: &str) -> Result<std::collections::HashMap<String, String>> {
    let mut map = std::collections::HashMap::new();
    for (lineno, line) in contents.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(lineno + 1, format!("expected key=value, got {line:?}")))?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn meta_usize(map: &std::collections::HashMap<String, String>, key: &str) -> Result<Option<usize>> {
    match map.get(key) {
        None => Ok(None),
        Some(raw) => raw
            .parse::<usize>()
            .map(Some)
            .map_err(|_| Error::invalid(format!("meta key {key}: expected integer, got {raw:?}"))),
    }
}

fn spec_from_meta(map: &std::collections::HashMap<String, String>) -> Result<Option<SynthSpec>> {
    if !map.contains_key("spec.seed") {
        return Ok(None);
    }
    let get = |key: &str| -> Result<&str> {
        map.get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::invalid(format!("meta is missing generator key {key}")))
    };
    let parse_f64 = |key: &str| -> Result<f64> {
        parse_decimal::<f64>(get(key)?)
            .ok_or_else(|| Error::invalid(format!("meta key {key}: expected number")))
    };
    let parse_usize = |key: &str| -> Result<usize> {
        get(key)?
            .parse()
            .map_err(|_| Error::invalid(format!("meta key {key}: expected integer")))
    };
    Ok(Some(SynthSpec {
        n_speakers: parse_usize("spec.n_speakers")?,
        n_emotions: parse_usize("spec.n_emotions")?,
        feature_dim: parse_usize("spec.feature_dim")?,
        speaker_scale: parse_f64("spec.speaker_scale")?,
        emotion_scale: parse_f64("spec.emotion_scale")?,
        noise_std: parse_f64("spec.noise_std")?,
        bias_rho: parse_f64("spec.bias_rho")?,
        samples_per_speaker: parse_usize("spec.samples_per_speaker")?,
        seed: get("spec.seed")?
            .parse()
            .map_err(|_| Error::invalid("meta key spec.seed: expected integer"))?,
        preference_permutation_seed: match map.get("spec.preference_permutation_seed") {
            None => None,
            Some(raw) => Some(raw.parse().map_err(|_| {
                Error::invalid("meta key spec.preference_permutation_seed: expected integer")
            })?),
        },
        speaker_space_rank: meta_usize(map, "spec.speaker_space_rank")?,
    }))
}

/// Loads a dataset saved by [`save_csv`]. The `.meta` sidecar, when present,
/// supplies the label cardinalities (and generator echo); without it they are
/// inferred as max label + 1.
pub fn load_csv(path: &Path) -> Result<Dataset> {
    let contents = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = contents.lines().enumerate();

    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "empty file, expected a CSV header"))?;
    let columns: Vec<&str> = header.split(',').collect();
    if columns.len() < 3 || columns[0] != "id" || columns[1] != "speaker" || columns[2] != "emotion"
    {
        return Err(Error::parse(
            1,
            format!("header must start with id,speaker,emotion, got {header:?}"),
        ));
    }
    let feature_dim = columns.len() - 3;
    for (i, name) in columns[3..].iter().enumerate() {
        if *name != format!("f{i}") {
            return Err(Error::parse(
                1,
                format!("feature column {i} must be named f{i}, got {name:?}"),
            ));
        }
    }

    let mut records = Vec::new();
    for (lineno, line) in lines {
        let lineno = lineno + 1; // 1-based for messages
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() {
            return Err(Error::parse(
                lineno,
                format!("expected {} fields, got {}", columns.len(), fields.len()),
            ));
        }
        let speaker = fields[1]
            .parse::<usize>()
            .map_err(|_| Error::parse(lineno, format!("bad speaker label {:?}", fields[1])))?;
        let emotion = fields[2]
            .parse::<usize>()
            .map_err(|_| Error::parse(lineno, format!("bad emotion label {:?}", fields[2])))?;
        let features = fields[3..]
            .iter()
            .map(|raw| {
                parse_decimal::<f64>(raw)
                    .ok_or_else(|| Error::parse(lineno, format!("bad feature value {raw:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        records.push(Record {
            id: fields[0].to_string(),
            speaker,
            emotion,
            features,
        });
    }

    let meta_file = meta_path(path);
    let (n_speakers, n_emotions, spec) = if meta_file.exists() {
        let map = parse_meta(&fs::read_to_string(&meta_file).map_err(|e| Error::io(&meta_file, e))?)?;
        if let Some(dim) = meta_usize(&map, "feature_dim")? {
            if dim != feature_dim {
                return Err(Error::shape(
                    "dataset meta",
                    format!("feature_dim {dim}"),
                    format!("{feature_dim} feature columns"),
                ));
            }
        }
        let inferred_speakers = records.iter().map(|r| r.speaker + 1).max().unwrap_or(0);
        let inferred_emotions = records.iter().map(|r| r.emotion + 1).max().unwrap_or(0);
        (
            meta_usize(&map, "n_speakers")?.unwrap_or(inferred_speakers),
            meta_usize(&map, "n_emotions")?.unwrap_or(inferred_emotions),
            spec_from_meta(&map)?,
        )
    } else {
        (
            records.iter().map(|r| r.speaker + 1).max().unwrap_or(0),
            records.iter().map(|r| r.emotion + 1).max().unwrap_or(0),
            None,
        )
    };

    let mut dataset = Dataset::new(n_speakers, n_emotions, feature_dim, records)?;
    if let Some(spec) = spec {
        dataset = dataset.with_source_spec(spec);
    }
    Ok(dataset)
}
