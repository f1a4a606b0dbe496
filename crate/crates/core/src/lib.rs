//! Desk-scale autoregressive raw-audio generation.
//!
//! Models 8-bit, 16 kHz waveforms as a product of per-sample categorical
//! distributions: each sample is predicted from the samples before it. Two
//! model families are provided — a stack of causal dilated convolutions with
//! gated units (`wavenet`) and a causal self-attention transformer
//! (`transformer`), optionally conditioned on a wider past context
//! (`conditioner`). Everything runs on a small f64 array library with
//! reverse-mode differentiation (`numerics`), so training, gradient checking
//! and generation are self-contained and bitwise reproducible under a seed.

pub mod audio;
pub mod conditioner;
pub mod config;
pub mod error;
pub mod model;
pub mod numerics;
pub mod signal;
pub mod synthesis;
pub mod train;
pub mod transformer;
pub mod wavenet;

pub use error::{Error, Result};
pub use numerics::array::Array;
pub use numerics::params::ParameterStore;
