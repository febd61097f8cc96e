//! Minimal dense numerics: matrices, one-hidden-layer networks with
//! analytic gradients, RMSProp, and a Jacobi eigensolver.

pub mod eig;
pub mod mat;
pub mod mlp;
pub mod rmsprop;

pub use eig::symmetric_eig;
pub use mat::Mat;
pub use mlp::{cross_entropy, ForwardCache, Mlp, MlpGrads, OutputActivation};
pub use rmsprop::{rmsprop_step, RmsPropState};
