//! The denoising network: configuration, parameters, passes and storage.

pub mod config;
pub mod file;
pub mod network;
pub mod params;

pub use config::{receptive_field, ModelConfig, NOISE_RANGE};
pub use file::{decode_model, encode_model, load_model, save_model, Precision};
pub use network::{
    backward, denoise, forward, map_channel, merge_batchnorm, pad_to_even, pad_to_multiple,
    BackwardOutput, CropSpec,
};
pub use params::{Layer, LayerGrads, ParamGrads, ParameterSet};
