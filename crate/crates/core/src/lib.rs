//! FFDNet-style image denoising: a plain CNN that works on 2x2-downsampled
//! sub-images and takes a per-pixel noise level map as an extra input channel.
//!
//! The crate covers the full pipeline:
//!
//! * [`tensor`] and [`layers`]: dense NCHW tensors, 3x3 convolution, ReLU and
//!   batch normalization with exact backward passes.
//! * [`pixelshuffle`]: the reversible downsampling operator and its inverse.
//! * [`model`]: network assembly, forward/backward passes, batch-norm merging
//!   and the model file format.
//! * [`init`]: orthogonal filter initialization.
//! * [`optim`]: Adam, the learning-rate schedule and the training driver.
//! * [`noise`]: noise level maps and synthetic Gaussian corruption.
//! * [`data`]: image I/O, dataset manifests, patches and augmentation.
//! * [`eval`]: PSNR and the noise-level sensitivity protocols.
//!
//! Pixel values are on a `[0, 1]` scale and noise levels are stored as
//! `sigma / 255`, so a map value matches the standard deviation of the noise
//! it describes in image units.

pub mod data;
pub mod error;
pub mod eval;
pub mod init;
pub mod layers;
pub mod model;
pub mod noise;
pub mod optim;
pub mod pixelshuffle;
pub mod tensor;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use tensor::{Shape4, Tensor4};
