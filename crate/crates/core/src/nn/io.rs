//! Plain-text network serialization.
//!
//! Format: a header line `mlp <n_layers>`, then per layer a line
//! `layer <in_dim> <out_dim> <activation>` followed by `in_dim` lines of
//! `out_dim` weight values (row-major) and one line of `out_dim` bias values.
//! Values are decimal text with enough significant digits that round-trips
//! are bit-lossless.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::activation::Activation;
use crate::nn::layer::DenseLayer;
use crate::nn::mlp::Mlp;
use crate::scalar::{encode_decimal, parse_decimal, Scalar};

/// Renders a network in the plain-text format.
pub fn format_mlp<F: Scalar>(net: &Mlp<F>) -> String {
    let mut out = String::new();
    out.push_str(&format!("mlp {}\n", net.layers().len()));
    for layer in net.layers() {
        out.push_str(&format!(
            "layer {} {} {}\n",
            layer.in_dim(),
            layer.out_dim(),
            layer.activation()
        ));
        for r in 0..layer.in_dim() {
            let row: Vec<String> = layer.weight().row(r).iter().map(|&v| encode_decimal(v)).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        let bias: Vec<String> = layer.bias().iter().map(|&v| encode_decimal(v)).collect();
        out.push_str(&bias.join(" "));
        out.push('\n');
    }
    out
}

/// Parses a network starting at `lines[*pos]`, advancing `pos` past the block.
///
/// Line numbers in errors are 1-based indices into `lines`, which lets a
/// containing format (e.g. a model-assembly file) report absolute positions.
pub fn parse_mlp<F: Scalar>(lines: &[&str], pos: &mut usize) -> Result<Mlp<F>> {
    let header = next_line(lines, pos)?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some("mlp") {
        return Err(Error::parse(*pos, format!("expected 'mlp <n_layers>', got {header:?}")));
    }
    let n_layers: usize = parts
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::parse(*pos, "malformed layer count in mlp header"))?;
    if n_layers == 0 {
        return Err(Error::parse(*pos, "an mlp block needs at least one layer"));
    }

    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let layer_line = next_line(lines, pos)?;
        let mut parts = layer_line.split_whitespace();
        if parts.next() != Some("layer") {
            return Err(Error::parse(
                *pos,
                format!("expected 'layer <in> <out> <activation>', got {layer_line:?}"),
            ));
        }
        let in_dim: usize = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::parse(*pos, "malformed in_dim"))?;
        let out_dim: usize = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::parse(*pos, "malformed out_dim"))?;
        let activation: Activation = parts
            .next()
            .ok_or_else(|| Error::parse(*pos, "missing activation tag"))?
            .parse()
            .map_err(|e| Error::parse(*pos, format!("{e}")))?;

        let mut weight_data = Vec::with_capacity(in_dim * out_dim);
        for _ in 0..in_dim {
            let row = next_line(lines, pos)?;
            parse_value_row::<F>(row, out_dim, *pos, &mut weight_data)?;
        }
        let mut bias = Vec::with_capacity(out_dim);
        let bias_line = next_line(lines, pos)?;
        parse_value_row::<F>(bias_line, out_dim, *pos, &mut bias)?;

        layers.push(DenseLayer::new(
            Matrix::from_vec(in_dim, out_dim, weight_data)?,
            bias,
            activation,
        )?);
    }
    Mlp::new(layers)
}

fn next_line<'a>(lines: &[&'a str], pos: &mut usize) -> Result<&'a str> {
    let line = lines
        .get(*pos)
        .ok_or_else(|| Error::parse(*pos + 1, "unexpected end of input"))?;
    *pos += 1;
    Ok(line)
}

fn parse_value_row<F: Scalar>(line: &str, expected: usize, line_no: usize, out: &mut Vec<F>) -> Result<()> {
    let mut count = 0;
    for token in line.split_whitespace() {
        let value: F = parse_decimal(token)
            .ok_or_else(|| Error::parse(line_no, format!("malformed number {token:?}")))?;
        out.push(value);
        count += 1;
    }
    if count != expected {
        return Err(Error::parse(
            line_no,
            format!("expected {expected} values, found {count}"),
        ));
    }
    Ok(())
}

/// Writes a network to `path` in the plain-text format.
pub fn save_mlp<F: Scalar>(net: &Mlp<F>, path: &Path) -> Result<()> {
    fs::write(path, format_mlp(net)).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Loads a network from `path`.
pub fn load_mlp<F: Scalar>(path: &Path) -> Result<Mlp<F>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let lines: Vec<&str> = text.lines().collect();
    let mut pos = 0;
    let net = parse_mlp(&lines, &mut pos)?;
    if pos != lines.len() {
        return Err(Error::parse(pos + 1, "trailing content after mlp block"));
    }
    Ok(net)
}
