use crate::error::{ensure, Result};

/// Noise level range the shipped presets are trained for, in 8-bit units.
pub const NOISE_RANGE: (f64, f64) = (0.0, 75.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    /// Total convolution layers: first Conv+ReLU, middle Conv+BN+ReLU, last Conv.
    pub num_layers: usize,
    /// Feature maps in every hidden layer.
    pub num_channels: usize,
    /// Image channels: 1 for grayscale, 3 for color.
    pub in_channels: usize,
    pub downsample_factor: usize,
    pub noise_map_channels: usize,
}

impl ModelConfig {
    /// 15 layers, 64 channels.
    pub const fn grayscale() -> Self {
        Self::new(15, 64, 1)
    }

    /// 12 layers, 96 channels.
    pub const fn color() -> Self {
        Self::new(12, 96, 3)
    }

    pub const fn new(num_layers: usize, num_channels: usize, in_channels: usize) -> Self {
        Self {
            num_layers,
            num_channels,
            in_channels,
            downsample_factor: 2,
            noise_map_channels: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.num_layers >= 2,
            "a network needs at least a first and a last layer, got {}",
            self.num_layers
        );
        ensure!(self.num_channels >= 1, "hidden layers need at least one channel");
        ensure!(
            self.in_channels == 1 || self.in_channels == 3,
            "images must have 1 or 3 channels, got {}",
            self.in_channels
        );
        ensure!(self.downsample_factor >= 1, "downsampling factor must be at least 1");
        ensure!(
            self.noise_map_channels == 1,
            "only single-channel noise level maps are supported"
        );
        Ok(())
    }

    /// Channels seen by the first convolution: sub-images plus the map.
    pub fn network_input_channels(&self) -> usize {
        self.sub_image_channels() + self.noise_map_channels
    }

    /// Channels produced by the last convolution.
    pub fn sub_image_channels(&self) -> usize {
        self.downsample_factor * self.downsample_factor * self.in_channels
    }

    pub fn receptive_field(&self) -> usize {
        receptive_field(self.num_layers, self.downsample_factor)
    }
}

/// Side length, in image pixels, of the receptive field of a stack of
/// `num_layers` 3x3 stride-1 convolutions run on sub-images downsampled by
/// `factor`: the stack covers `2 * num_layers + 1` sub-pixels, each spanning
/// `factor` image pixels.
pub fn receptive_field(num_layers: usize, factor: usize) -> usize {
    factor * (2 * num_layers + 1)
}
