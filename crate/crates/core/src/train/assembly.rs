use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::io::{format_mlp, parse_mlp};
use crate::nn::{argmax_rows, Activation};
use crate::rng::SplitMix64;
use crate::{Matrix64, Mlp64};

use super::Strategy;

// Independent init streams per sub-network, so strategies that add or drop a
// part (the projector) never shift the draws of the others.
const STREAM_INIT_UPSTREAM: u64 = 10;
const STREAM_INIT_PROJECTOR: u64 = 11;
const STREAM_INIT_EMOTION_HEAD: u64 = 12;
const STREAM_INIT_SPEAKER_HEAD: u64 = 13;

/// The trainable parts: upstream encoder `w`, optional projector gate `ŵ`
/// (SNP only), emotion head `w_er`, speaker head `w_id`. Both heads consume
/// the same representation — the projector output when present, the upstream
/// output otherwise.
#[derive(Debug, Clone)]
pub struct ModelAssembly {
    strategy: Strategy,
    upstream: Mlp64,
    projector: Option<Mlp64>,
    emotion_head: Mlp64,
    speaker_head: Mlp64,
    /// Instrumentation: number of backward passes computed through the
    /// upstream encoder. SNP speaker steps must never increment it.
    upstream_grad_passes: u64,
}

impl ModelAssembly {
    pub fn new(
        strategy: Strategy,
        upstream: Mlp64,
        projector: Option<Mlp64>,
        emotion_head: Mlp64,
        speaker_head: Mlp64,
    ) -> Result<Self> {
        if strategy.uses_projector() != projector.is_some() {
            return Err(Error::invalid(format!(
                "strategy {strategy} {} a projector",
                if strategy.uses_projector() { "requires" } else { "forbids" }
            )));
        }
        let representation_dim = match &projector {
            Some(p) => {
                if p.layers().len() != 1 {
                    return Err(Error::invalid(format!(
                        "projector must be a single layer, got {}",
                        p.layers().len()
                    )));
                }
                if p.layers()[0].activation() == Activation::Identity {
                    return Err(Error::invalid("projector layer must be non-linear"));
                }
                if p.in_dim() != upstream.out_dim() {
                    return Err(Error::shape(
                        "assembly upstream→projector",
                        format!("upstream out {}", upstream.out_dim()),
                        format!("projector in {}", p.in_dim()),
                    ));
                }
                p.out_dim()
            }
            None => upstream.out_dim(),
        };
        for (name, head) in [("emotion head", &emotion_head), ("speaker head", &speaker_head)] {
            if head.in_dim() != representation_dim {
                return Err(Error::shape(
                    format!("assembly representation→{name}"),
                    format!("representation dim {representation_dim}"),
                    format!("{name} in {}", head.in_dim()),
                ));
            }
        }
        Ok(ModelAssembly {
            strategy,
            upstream,
            projector,
            emotion_head,
            speaker_head,
            upstream_grad_passes: 0,
        })
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn upstream(&self) -> &Mlp64 {
        &self.upstream
    }

    pub fn projector(&self) -> Option<&Mlp64> {
        self.projector.as_ref()
    }

    pub fn emotion_head(&self) -> &Mlp64 {
        &self.emotion_head
    }

    pub fn speaker_head(&self) -> &Mlp64 {
        &self.speaker_head
    }

    /// Dimension of the representation both heads consume.
    pub fn representation_dim(&self) -> usize {
        self.projector
            .as_ref()
            .map_or(self.upstream.out_dim(), |p| p.out_dim())
    }

    pub fn feature_dim(&self) -> usize {
        self.upstream.in_dim()
    }

    pub fn upstream_grad_passes(&self) -> u64 {
        self.upstream_grad_passes
    }

    pub(crate) fn parts_mut(
        &mut self,
    ) -> (&mut Mlp64, Option<&mut Mlp64>, &mut Mlp64, &mut Mlp64, &mut u64) {
        (
            &mut self.upstream,
            self.projector.as_mut(),
            &mut self.emotion_head,
            &mut self.speaker_head,
            &mut self.upstream_grad_passes,
        )
    }

    /// The shared representation: upstream output, gated through the
    /// projector when one is present.
    pub fn representation(&self, input: &Matrix64) -> Result<Matrix64> {
        let (out, _) = self.upstream.forward(input)?;
        match &self.projector {
            Some(p) => Ok(p.forward(&out)?.0),
            None => Ok(out),
        }
    }

    pub fn emotion_logits(&self, input: &Matrix64) -> Result<Matrix64> {
        let rep = self.representation(input)?;
        Ok(self.emotion_head.forward(&rep)?.0)
    }

    pub fn speaker_logits(&self, input: &Matrix64) -> Result<Matrix64> {
        let rep = self.representation(input)?;
        Ok(self.speaker_head.forward(&rep)?.0)
    }

    pub fn predict_emotion(&self, input: &Matrix64) -> Result<Vec<usize>> {
        Ok(argmax_rows(&self.emotion_logits(input)?))
    }

    pub fn predict_speaker(&self, input: &Matrix64) -> Result<Vec<usize>> {
        Ok(argmax_rows(&self.speaker_logits(input)?))
    }

    /// Order-sensitive hash over every parameter bit of every part (the
    /// instrumentation counter is excluded). Equal hashes are the working
    /// definition of "bit-identical parameters" in tests and probes.
    pub fn assembly_hash(&self) -> u64 {
        let mut hash = 0xcbf2_9ce4_8422_2325u64 ^ self.strategy.name().len() as u64;
        for part in [
            Some(&self.upstream),
            self.projector.as_ref(),
            Some(&self.emotion_head),
            Some(&self.speaker_head),
        ]
        .into_iter()
        .flatten()
        {
            hash ^= part.param_hash();
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
        hash
    }

    /// Opaque copy for best-epoch stopping.
    pub fn snapshot(&self) -> ModelAssembly {
        self.clone()
    }

    /// Restores parameters and strategy from a snapshot. The instrumentation
    /// counter keeps counting across restores.
    pub fn restore(&mut self, snapshot: &ModelAssembly) {
        let passes = self.upstream_grad_passes;
        *self = snapshot.clone();
        self.upstream_grad_passes = passes;
    }
}

/// Shape recipe for building assemblies: feature dim in, hidden chain through
/// the upstream (last entry is the representation dim k), one dense logit
/// layer per head, plus a k→k tanh projector under SNP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssemblyPlan {
    pub feature_dim: usize,
    /// Upstream layer widths; the last entry is the representation dim.
    pub upstream_dims: Vec<usize>,
    pub upstream_activation: Activation,
    pub n_emotions: usize,
    pub n_speakers: usize,
    pub strategy: Strategy,
}

impl AssemblyPlan {
    /// Default desk-scale layout: feature_dim → 64 → 32 relu encoder and
    /// single-layer heads.
    pub fn new(feature_dim: usize, n_emotions: usize, n_speakers: usize, strategy: Strategy) -> Self {
        AssemblyPlan {
            feature_dim,
            upstream_dims: vec![64, 32],
            upstream_activation: Activation::Relu,
            n_emotions,
            n_speakers,
            strategy,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_dim == 0 {
            return Err(Error::invalid("feature_dim must be positive"));
        }
        if self.upstream_dims.is_empty() {
            return Err(Error::invalid("upstream_dims must name at least one layer"));
        }
        if self.upstream_dims.iter().any(|&d| d == 0) {
            return Err(Error::invalid("upstream_dims must all be positive"));
        }
        if self.n_emotions < 2 || self.n_speakers < 2 {
            return Err(Error::invalid("need at least 2 emotions and 2 speakers"));
        }
        Ok(())
    }

    /// Representation dim k.
    pub fn representation_dim(&self) -> usize {
        *self.upstream_dims.last().expect("validated non-empty")
    }

    /// Builds and initializes the assembly, deterministically in `seed`.
    pub fn build(&self, seed: u64) -> Result<ModelAssembly> {
        self.validate()?;
        let mut dims = Vec::with_capacity(self.upstream_dims.len() + 1);
        dims.push(self.feature_dim);
        dims.extend_from_slice(&self.upstream_dims);
        let activations = vec![self.upstream_activation; self.upstream_dims.len()];
        let upstream = Mlp64::init(&dims, &activations, &mut SplitMix64::derive(seed, STREAM_INIT_UPSTREAM))?;

        let k = self.representation_dim();
        let projector = if self.strategy.uses_projector() {
            Some(Mlp64::init(
                &[k, k],
                &[Activation::Tanh],
                &mut SplitMix64::derive(seed, STREAM_INIT_PROJECTOR),
            )?)
        } else {
            None
        };
        let emotion_head = Mlp64::init(
            &[k, self.n_emotions],
            &[Activation::Identity],
            &mut SplitMix64::derive(seed, STREAM_INIT_EMOTION_HEAD),
        )?;
        let speaker_head = Mlp64::init(
            &[k, self.n_speakers],
            &[Activation::Identity],
            &mut SplitMix64::derive(seed, STREAM_INIT_SPEAKER_HEAD),
        )?;
        ModelAssembly::new(self.strategy, upstream, projector, emotion_head, speaker_head)
    }
}

/// Serializes an assembly as labeled sections of the plain-text model format.
pub fn format_assembly(assembly: &ModelAssembly) -> String {
    let mut out = String::new();
    out.push_str("assembly v1\n");
    out.push_str(&format!("strategy {}\n", assembly.strategy));
    out.push_str("upstream\n");
    out.push_str(&format_mlp(&assembly.upstream));
    match &assembly.projector {
        Some(p) => {
            out.push_str("projector\n");
            out.push_str(&format_mlp(p));
        }
        None => out.push_str("projector none\n"),
    }
    out.push_str("emotion_head\n");
    out.push_str(&format_mlp(&assembly.emotion_head));
    out.push_str("speaker_head\n");
    out.push_str(&format_mlp(&assembly.speaker_head));
    out
}

fn expect_line<'a>(lines: &[&'a str], pos: &mut usize, what: &str) -> Result<&'a str> {
    let line = lines
        .get(*pos)
        .ok_or_else(|| Error::parse(*pos + 1, format!("unexpected end of file, expected {what}")))?;
    *pos += 1;
    Ok(line.trim())
}

fn expect_section(lines: &[&str], pos: &mut usize, name: &str) -> Result<()> {
    let line = expect_line(lines, pos, &format!("section {name}"))?;
    if line != name {
        return Err(Error::parse(*pos, format!("expected section {name:?}, got {line:?}")));
    }
    Ok(())
}

/// Parses the output of [`format_assembly`] starting at `*pos` (0-based line
/// index), advancing it past the assembly.
pub fn parse_assembly(lines: &[&str], pos: &mut usize) -> Result<ModelAssembly> {
    let header = expect_line(lines, pos, "assembly header")?;
    if header != "assembly v1" {
        return Err(Error::parse(*pos, format!("expected `assembly v1`, got {header:?}")));
    }
    let strategy_line = expect_line(lines, pos, "strategy line")?;
    let strategy: Strategy = match strategy_line.strip_prefix("strategy ") {
        Some(name) => name.trim().parse()?,
        None => return Err(Error::parse(*pos, format!("expected `strategy <name>`, got {strategy_line:?}"))),
    };

    expect_section(lines, pos, "upstream")?;
    let upstream = parse_mlp::<f64>(lines, pos)?;

    let projector_line = expect_line(lines, pos, "projector section")?;
    let projector = match projector_line {
        "projector none" => None,
        "projector" => Some(parse_mlp::<f64>(lines, pos)?),
        other => {
            return Err(Error::parse(*pos, format!("expected projector section, got {other:?}")));
        }
    };

    expect_section(lines, pos, "emotion_head")?;
    let emotion_head = parse_mlp::<f64>(lines, pos)?;
    expect_section(lines, pos, "speaker_head")?;
    let speaker_head = parse_mlp::<f64>(lines, pos)?;

    ModelAssembly::new(strategy, upstream, projector, emotion_head, speaker_head)
}

pub fn save_assembly(assembly: &ModelAssembly, path: &Path) -> Result<()> {
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(format_assembly(assembly).as_bytes())
        .map_err(|e| Error::io(path, e))
}

pub fn load_assembly(path: &Path) -> Result<ModelAssembly> {
    let contents = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let lines: Vec<&str> = contents.lines().collect();
    let mut pos = 0;
    let assembly = parse_assembly(&lines, &mut pos)?;
    if pos != lines.len() {
        return Err(Error::parse(pos + 1, "trailing content after assembly"));
    }
    Ok(assembly)
}
