//! Speaker diarization on precomputed segment embeddings with a GAN mixture
//! model: spectral embedding of cosine affinities, k-means-initialized
//! adversarial EM clustering, median-smoothed frame inference, and
//! NIST-style DER scoring.
//!
//! The numeric core is generic over the scalar type (`f32`/`f64`) through
//! [`scalar::Real`]; the CLI and pipeline entry points use `f64`. Scoring
//! accumulates time as exact integer milliseconds.

pub mod error;
pub mod inference;
pub mod ingest;
pub mod kmeans;
pub mod mixture;
pub mod numeric;
pub mod pipeline;
pub mod scalar;
pub mod scoring;
pub mod spectral;
pub mod synthetic;

pub use error::{Error, Result};
pub use scalar::Real;

/// Concrete aliases for the two supported scalar types. The pipeline and
/// CLI work in `f64`; the `*32` forms exist for callers that want the
/// smaller footprint.
pub type Mat64 = numeric::Mat<f64>;
pub type Mat32 = numeric::Mat<f32>;
pub type Mlp64 = numeric::Mlp<f64>;
pub type Mlp32 = numeric::Mlp<f32>;
pub type EmbeddingStream64 = ingest::EmbeddingStream<f64>;
pub type EmbeddingStream32 = ingest::EmbeddingStream<f32>;
pub type AffinityMatrix64 = spectral::AffinityMatrix<f64>;
pub type AffinityMatrix32 = spectral::AffinityMatrix<f32>;
pub type GanmmModel64 = mixture::GanmmModel<f64>;
pub type GanmmModel32 = mixture::GanmmModel<f32>;
pub type Partition64 = mixture::Partition<f64>;
pub type Partition32 = mixture::Partition<f32>;
