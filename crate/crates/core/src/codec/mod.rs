//! Neural semantic transceiver: MLP encoder with two heads, power
//! normalization, MLP decoder, plus the codebook variant.
//!
//! Complex latents live in the network as `2k` interleaved reals
//! `(re₀, im₀, re₁, im₁, …)`.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod model;
pub mod nn;
pub mod train;
pub mod vq;

use num_complex::Complex64;

pub use model::{power_normalize, reparameterize, ArchSpec, EncoderOutput, SemanticCodec, SemanticSignal, Variant};
pub use train::{train_elbo, train_vqvae, EpsilonMode, TrainConfig, TrainReport};
pub use vq::{vq_quantize, Codebook};

pub fn to_interleaved(values: &[Complex64]) -> Vec<f64> {
    values.iter().flat_map(|c| [c.re, c.im]).collect()
}

pub fn from_interleaved(values: &[f64]) -> Vec<Complex64> {
    values.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect()
}

/// `0.5·(m² + s² − 1 − ln s²)` for one real dimension with variance `s²`.
pub fn gaussian_kl(mean: f64, variance: f64) -> f64 {
    0.5 * (mean * mean + variance - 1.0 - variance.ln())
}
