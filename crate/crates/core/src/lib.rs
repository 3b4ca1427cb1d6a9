//! Selective-scan feature fusion between image feature maps and text state.
//!
//! The crate provides, bottom-up:
//!
//! - [`numerics`]: tensors, parameters, dense/conv layers, gradient checking;
//! - [`ssm`]: the discretized selective-scan recurrence and its backward pass;
//! - [`text`]: token embeddings and scan-based text blocks;
//! - [`fusion`]: text-conditioned scans over rasterized feature maps;
//! - [`pan`]: the three-stage fusion neck and a cross-attention baseline;
//! - [`flops`]: shape-based multiply-accumulate accounting for both necks;
//! - [`toy`]: a synthetic colored-shapes grounding task for end-to-end runs.
//!
//! All forward passes are deterministic given identical inputs, every
//! trainable path has a hand-written backward verified against central
//! finite differences, and shape errors surface as [`error::Error`] values
//! rather than panics.

pub mod error;
pub mod numerics;
pub mod ssm;

pub use error::{Error, Result};
