//! Dense layer: `y = activation(x W + b)`.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::activation::Activation;
use crate::rng::SplitMix64;
use crate::scalar::Scalar;

/// A dense affine layer with an element-wise activation.
///
/// The weight is stored `in_dim x out_dim`, so a batch `x` (`n x in_dim`)
/// maps to `x W + b` (`n x out_dim`).
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<F: Scalar> {
    weight: Matrix<F>,
    bias: Vec<F>,
    activation: Activation,
}

impl<F: Scalar> DenseLayer<F> {
    /// Builds a layer from explicit parameters.
    pub fn new(weight: Matrix<F>, bias: Vec<F>, activation: Activation) -> Result<Self> {
        if bias.len() != weight.cols() {
            return Err(Error::shape(
                "DenseLayer::new",
                format!("weight {}x{}", weight.rows(), weight.cols()),
                format!("bias length {}", bias.len()),
            ));
        }
        Ok(DenseLayer {
            weight,
            bias,
            activation,
        })
    }

    /// Seeded initialization: weights uniform in `[-a, a]` with
    /// `a = sqrt(6 / (in_dim + out_dim))`, biases zero.
    pub fn init(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut SplitMix64) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::invalid(format!(
                "layer dimensions must be positive, got {in_dim}x{out_dim}"
            )));
        }
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let data: Vec<F> = (0..in_dim * out_dim)
            .map(|_| F::from_f64_lossy(rng.uniform(-limit, limit)))
            .collect();
        Ok(DenseLayer {
            weight: Matrix::from_vec(in_dim, out_dim, data)?,
            bias: vec![F::zero(); out_dim],
            activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weight(&self) -> &Matrix<F> {
        &self.weight
    }

    pub fn bias(&self) -> &[F] {
        &self.bias
    }

    pub(crate) fn weight_mut(&mut self) -> &mut Matrix<F> {
        &mut self.weight
    }

    pub(crate) fn bias_mut(&mut self) -> &mut [F] {
        &mut self.bias
    }

    /// Applies the layer to a batch (`n x in_dim -> n x out_dim`).
    pub fn forward(&self, input: &Matrix<F>) -> Result<Matrix<F>> {
        if input.cols() != self.in_dim() {
            return Err(Error::shape(
                "DenseLayer::forward",
                format!("input {}x{}", input.rows(), input.cols()),
                format!("weight {}x{}", self.in_dim(), self.out_dim()),
            ));
        }
        let mut out = input.matmul(&self.weight)?;
        out.add_row_vector(&self.bias)?;
        for v in out.data_mut() {
            *v = self.activation.apply(*v);
        }
        Ok(out)
    }

    pub fn param_count(&self) -> usize {
        self.weight.data().len() + self.bias.len()
    }
}
