//! Differentiable building blocks: convolution, ReLU and batch normalization.

pub mod batchnorm;
pub mod conv;
pub mod relu;

pub use batchnorm::{
    batchnorm_backward, batchnorm_fold, batchnorm_forward, BatchNormGrads, BatchNormLayer,
    BatchStats, Mode,
};
pub use conv::{conv2d_backward, conv2d_backward_params, conv2d_forward, ConvGrads, ConvLayer};
pub use relu::{relu_backward, relu_forward};
