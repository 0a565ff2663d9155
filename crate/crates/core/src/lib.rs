//! Adversarial normalization of nuisance-task features from a learned
//! representation, at desk scale.
//!
//! The crate trains a target classifier (emotion) on top of an upstream
//! encoder while a second head (speaker identity) drives gradient-ascent
//! updates that scrub its cues out of the shared representation. Around that
//! core sit a synthetic biased-data generator, the evaluation protocols
//! (five-fold speaker-independent cross-validation, speaker-dependent splits,
//! frozen-encoder probes, low-resource learning curves), and text formats for
//! models, datasets, and reports.
//!
//! The numerical core ([`nn`], [`matrix`]) is generic over the scalar type;
//! training and evaluation use the `f64` aliases below, since the gradient
//! tolerances assume double precision.

pub mod error;
pub mod eval;
pub mod matrix;
pub mod nn;
pub mod parallel;
pub mod rng;
pub mod scalar;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Double-precision instantiations used by the trainer and the harness.
pub type Matrix64 = matrix::Matrix<f64>;
pub type Mlp64 = nn::Mlp<f64>;
pub type Gradients64 = nn::Gradients<f64>;
pub type DenseLayer64 = nn::DenseLayer<f64>;

/// Single-precision instantiations of the numerical core.
pub type Matrix32 = matrix::Matrix<f32>;
pub type Mlp32 = nn::Mlp<f32>;
pub type Gradients32 = nn::Gradients<f32>;
pub type DenseLayer32 = nn::DenseLayer<f32>;
