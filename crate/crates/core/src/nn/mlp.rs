//! Multi-layer perceptron: forward, backward, and parameter updates.
//!
//! The backward pass returns both the parameter gradients and the gradient
//! with respect to the network input, which is what lets losses flow from a
//! downstream head back into an upstream encoder.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::activation::Activation;
use crate::nn::layer::DenseLayer;
use crate::rng::SplitMix64;
use crate::scalar::Scalar;

/// A stack of dense layers. Always at least one layer; adjacent layers are
/// dimension-compatible by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<F: Scalar> {
    layers: Vec<DenseLayer<F>>,
}

/// Activation record produced by [`Mlp::forward`], consumed by [`Mlp::backward`].
///
/// `activations[0]` is the input batch, `activations[i + 1]` the output of
/// layer `i`. The signature pins the producing network's architecture so a
/// cache handed to the wrong network is rejected.
#[derive(Debug, Clone)]
pub struct ForwardCache<F: Scalar> {
    activations: Vec<Matrix<F>>,
    signature: Vec<(usize, usize, Activation)>,
}

impl<F: Scalar> ForwardCache<F> {
    /// Final activation (the forward output).
    pub fn output(&self) -> &Matrix<F> {
        self.activations.last().expect("cache holds at least the input")
    }
}

/// Per-layer gradient matrices mirroring an [`Mlp`]'s shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<F: Scalar> {
    layers: Vec<LayerGradients<F>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradients<F: Scalar> {
    pub d_weight: Matrix<F>,
    pub d_bias: Vec<F>,
}

impl<F: Scalar> Gradients<F> {
    pub fn zeros_like(net: &Mlp<F>) -> Self {
        Gradients {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGradients {
                    d_weight: Matrix::zeros(l.in_dim(), l.out_dim()),
                    d_bias: vec![F::zero(); l.out_dim()],
                })
                .collect(),
        }
    }

    pub fn layers(&self) -> &[LayerGradients<F>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [LayerGradients<F>] {
        &mut self.layers
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.d_weight.all_finite() && l.d_bias.iter().all(|v| v.is_finite()))
    }

    /// Sign-flipped copy. Exact in IEEE arithmetic.
    pub fn negated(&self) -> Self {
        Gradients {
            layers: self
                .layers
                .iter()
                .map(|l| {
                    let mut d_weight = l.d_weight.clone();
                    for v in d_weight.data_mut() {
                        *v = -*v;
                    }
                    LayerGradients {
                        d_weight,
                        d_bias: l.d_bias.iter().map(|&v| -v).collect(),
                    }
                })
                .collect(),
        }
    }

    fn mirrors(&self, net: &Mlp<F>) -> bool {
        self.layers.len() == net.layers.len()
            && self.layers.iter().zip(net.layers.iter()).all(|(g, l)| {
                g.d_weight.shape() == (l.in_dim(), l.out_dim()) && g.d_bias.len() == l.out_dim()
            })
    }

    /// Flat gradient entry in the same order as [`Mlp::param`].
    pub fn entry(&self, mut index: usize) -> Option<F> {
        for layer in &self.layers {
            let w = layer.d_weight.data().len();
            if index < w {
                return Some(layer.d_weight.data()[index]);
            }
            index -= w;
            if index < layer.d_bias.len() {
                return Some(layer.d_bias[index]);
            }
            index -= layer.d_bias.len();
        }
        None
    }
}

/// Whether an update moves against the gradient (loss minimization) or along
/// it (adversarial maximization).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateDirection {
    Descent,
    Ascent,
}

impl<F: Scalar> Mlp<F> {
    /// Builds a network from explicit layers, validating dimension chaining.
    pub fn new(layers: Vec<DenseLayer<F>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("an Mlp needs at least one layer"));
        }
        for i in 1..layers.len() {
            if layers[i - 1].out_dim() != layers[i].in_dim() {
                return Err(Error::shape(
                    format!("Mlp::new layers {} -> {}", i - 1, i),
                    format!("out_dim {}", layers[i - 1].out_dim()),
                    format!("in_dim {}", layers[i].in_dim()),
                ));
            }
        }
        Ok(Mlp { layers })
    }

    /// Seeded construction: `dims = [in, hidden..., out]` with one activation
    /// per layer.
    pub fn init(dims: &[usize], activations: &[Activation], rng: &mut SplitMix64) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::invalid("Mlp::init needs at least [in, out] dims"));
        }
        if activations.len() != dims.len() - 1 {
            return Err(Error::invalid(format!(
                "expected {} activations for {} dims, got {}",
                dims.len() - 1,
                dims.len(),
                activations.len()
            )));
        }
        let layers = dims
            .windows(2)
            .zip(activations.iter())
            .map(|(pair, &act)| DenseLayer::init(pair[0], pair[1], act, rng))
            .collect::<Result<Vec<_>>>()?;
        Mlp::new(layers)
    }

    pub fn layers(&self) -> &[DenseLayer<F>] {
        &self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().expect("non-empty").out_dim()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.param_count()).sum()
    }

    fn signature(&self) -> Vec<(usize, usize, Activation)> {
        self.layers
            .iter()
            .map(|l| (l.in_dim(), l.out_dim(), l.activation()))
            .collect()
    }

    /// Flat parameter read. Layout: per layer, weights row-major then bias.
    pub fn param(&self, mut index: usize) -> Option<F> {
        for layer in &self.layers {
            let w = layer.weight().data().len();
            if index < w {
                return Some(layer.weight().data()[index]);
            }
            index -= w;
            if index < layer.bias().len() {
                return Some(layer.bias()[index]);
            }
            index -= layer.bias().len();
        }
        None
    }

    /// Flat parameter write, mirroring [`Mlp::param`].
    pub fn set_param(&mut self, mut index: usize, value: F) -> Result<()> {
        for layer in &mut self.layers {
            let w = layer.weight().data().len();
            if index < w {
                layer.weight_mut().data_mut()[index] = value;
                return Ok(());
            }
            index -= w;
            let b = layer.bias().len();
            if index < b {
                layer.bias_mut()[index] = value;
                return Ok(());
            }
            index -= b;
        }
        Err(Error::invalid(format!(
            "parameter index {index} out of range for {} parameters",
            self.param_count()
        )))
    }

    /// Order-sensitive hash of the raw parameter bits. Two networks share a
    /// hash iff their parameters are bit-identical (up to hash collisions).
    pub fn param_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut mix = |bits: u64| {
            h ^= bits;
            h = h.wrapping_mul(0x100_0000_01b3);
            h ^= h >> 32;
        };
        for layer in &self.layers {
            for &v in layer.weight().data() {
                mix(v.to_bits_u64());
            }
            for &v in layer.bias() {
                mix(v.to_bits_u64());
            }
        }
        h
    }

    /// Runs the batch through every layer, recording the activations needed
    /// by [`Mlp::backward`].
    pub fn forward(&self, input: &Matrix<F>) -> Result<(Matrix<F>, ForwardCache<F>)> {
        if input.cols() != self.in_dim() {
            return Err(Error::shape(
                "Mlp::forward",
                format!("input {}x{}", input.rows(), input.cols()),
                format!("first layer expects in_dim {}", self.in_dim()),
            ));
        }
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.clone());
        for layer in &self.layers {
            let next = layer.forward(activations.last().expect("non-empty"))?;
            if !next.all_finite() {
                return Err(Error::NonFinite("Mlp::forward layer output".into()));
            }
            activations.push(next);
        }
        let output = activations.last().expect("non-empty").clone();
        Ok((
            output,
            ForwardCache {
                activations,
                signature: self.signature(),
            },
        ))
    }

    /// Backpropagates `doutput` through the recorded activations, producing
    /// parameter gradients and the gradient with respect to the input batch.
    pub fn backward(&self, cache: &ForwardCache<F>, doutput: &Matrix<F>) -> Result<(Gradients<F>, Matrix<F>)> {
        if cache.signature != self.signature() {
            return Err(Error::contract(
                "forward cache does not match this network (stale or from another net)",
            ));
        }
        let out_shape = cache.output().shape();
        if doutput.shape() != out_shape {
            return Err(Error::shape(
                "Mlp::backward",
                format!("doutput {}x{}", doutput.rows(), doutput.cols()),
                format!("forward output {}x{}", out_shape.0, out_shape.1),
            ));
        }

        let mut grads = Vec::with_capacity(self.layers.len());
        let mut upstream = doutput.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let layer_input = &cache.activations[i];
            let layer_output = &cache.activations[i + 1];

            // dZ = dY (.) act'(Y)
            let mut dz = upstream;
            for (v, &y) in dz.data_mut().iter_mut().zip(layer_output.data().iter()) {
                *v = *v * layer.activation().derivative_from_output(y);
            }

            let d_weight = layer_input.transpose_matmul(&dz)?;
            let d_bias = dz.column_sums();
            upstream = dz.matmul_transpose(layer.weight())?;
            grads.push(LayerGradients { d_weight, d_bias });
        }
        grads.reverse();

        let grads = Gradients { layers: grads };
        if !grads.all_finite() || !upstream.all_finite() {
            return Err(Error::NonFinite("Mlp::backward gradients".into()));
        }
        Ok((grads, upstream))
    }

    /// SGD-style in-place update: `p <- p -/+ rate * g` per parameter.
    ///
    /// Parameters with exactly zero gradient are left bit-unchanged, and an
    /// ascent step is bit-identical to a descent step on the negated
    /// gradients.
    pub fn apply_update(&mut self, grads: &Gradients<F>, rate: F, direction: UpdateDirection) -> Result<()> {
        if !(rate > F::zero()) || !rate.is_finite() {
            return Err(Error::invalid(format!(
                "update rate must be positive and finite, got {rate}"
            )));
        }
        if !grads.mirrors(self) {
            return Err(Error::shape(
                "Mlp::apply_update",
                "gradient shapes",
                "network parameter shapes",
            ));
        }
        if !grads.all_finite() {
            return Err(Error::NonFinite("Mlp::apply_update gradients".into()));
        }
        let signed_rate = match direction {
            UpdateDirection::Descent => -rate,
            UpdateDirection::Ascent => rate,
        };
        for (layer, grad) in self.layers.iter_mut().zip(grads.layers.iter()) {
            let weights = layer.weight_mut().data_mut();
            for (p, &g) in weights.iter_mut().zip(grad.d_weight.data().iter()) {
                if g != F::zero() {
                    *p = *p + signed_rate * g;
                }
            }
            for (p, &g) in layer.bias_mut().iter_mut().zip(grad.d_bias.iter()) {
                if g != F::zero() {
                    *p = *p + signed_rate * g;
                }
            }
        }
        Ok(())
    }
}
