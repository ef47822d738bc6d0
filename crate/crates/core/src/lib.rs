//! Uncertainty-driven adaptive k-space sampling for Fourier compressed sensing.
//!
//! The crate covers the whole chain: centered unitary transforms, posterior
//! samplers conditioned on low-frequency data, k-space uncertainty maps, mask
//! generators, k-means++ over uncertainty signatures, zero-fill and FISTA
//! reconstructors, and the train/infer pipeline that dispatches each input to
//! one of `J` pre-trained (mask, reconstructor) pairs.

pub mod clustering;
pub mod error;
pub mod grid;
pub mod io;
pub mod mask;
pub mod maskgen;
pub mod metrics;
pub mod pipeline;
pub mod recon;
pub mod rng;
pub mod samplers;
pub mod transforms;
pub mod uncertainty;
pub mod wavelet;

pub use error::{Error, Result};
pub use grid::{ImageGrid, KGrid, Shape};
pub use mask::{MaskKind, SamplingMask};
pub use pipeline::{infer_adaptive, select_index, train_adaptive, Inference, PairBank, TrainConfig};
pub use recon::{reconstruct, ReconParams, ReconVariant};
pub use samplers::{SampleEnsemble, SamplerSpec, SamplerVariant};
pub use uncertainty::{NormalizedUncertainty, UncertaintyMap};
