//! Dense-network numerical core.
//!
//! Generic over the scalar type; see the aliases at the crate root for the
//! concrete `f32`/`f64` instantiations.

pub mod activation;
pub mod gradcheck;
pub mod io;
pub mod layer;
pub mod loss;
pub mod mlp;

pub use activation::Activation;
pub use gradcheck::{
    check_random_instance, compare_gradients, finite_diff_grad, GradCheckReport, GradCheckTolerance,
};
pub use layer::DenseLayer;
pub use loss::{argmax_rows, softmax_cross_entropy};
pub use mlp::{ForwardCache, Gradients, LayerGradients, Mlp, UpdateDirection};
