//! Forward and backward passes of the denoiser.
//!
//! The noisy image is split into `factor^2` sub-images per channel, the
//! half-resolution noise level map is appended as one more channel, the
//! convolution stack runs on the result and the final `factor^2 * C`
//! channels are reassembled into a full-resolution image. The network outputs
//! the clean estimate directly (no residual connection).

use crate::error::{ensure, Error, Result};
use crate::layers::{
    batchnorm_backward, batchnorm_fold, batchnorm_forward, conv2d_backward, conv2d_backward_params,
    conv2d_forward, relu::relu_backward_from_output, relu_forward, BatchStats, Mode,
};
use crate::model::params::{LayerGrads, ParamGrads, ParameterSet};
use crate::noise::NoiseLevelMap;
use crate::pixelshuffle::{depth_to_space, space_to_depth};
use crate::tensor::{Shape4, Tensor4};

/// Builds the `batch x 1 x H/f x W/f` map channel. Each map may be given at
/// full image resolution (it is bilinearly downsampled) or already at
/// sub-image resolution. A single map is shared by the whole batch.
pub fn map_channel(maps: &[NoiseLevelMap], image: Shape4, factor: usize) -> Result<Tensor4> {
    ensure!(
        maps.len() == 1 || maps.len() == image.batch,
        "expected 1 or {} noise maps, got {}",
        image.batch,
        maps.len()
    );
    let (sh, sw) = (image.height / factor, image.width / factor);
    let mut lowres = Vec::with_capacity(maps.len());
    for map in maps {
        let (mh, mw) = (map.height(), map.width());
        let small = if (mh, mw) == (image.height, image.width) {
            map.downsample_bilinear(factor)?
        } else if (mh, mw) == (sh, sw) {
            map.clone()
        } else {
            return Err(Error::Contract(format!(
                "noise map is {mh}x{mw}; expected {}x{} or {sh}x{sw}",
                image.height, image.width
            )));
        };
        lowres.push(small);
    }
    let mut out = Tensor4::zeros(Shape4::new(image.batch, 1, sh, sw));
    for n in 0..image.batch {
        let src = if lowres.len() == 1 { &lowres[0] } else { &lowres[n] };
        out.plane_mut(n, 0).copy_from_slice(src.values());
    }
    Ok(out)
}

fn check_inputs(params: &ParameterSet, noisy: &Tensor4) -> Result<()> {
    params.validate()?;
    let cfg = &params.config;
    let s = noisy.shape();
    ensure!(
        s.channels == cfg.in_channels,
        "model expects {} image channels, got {}",
        cfg.in_channels,
        s.channels
    );
    let f = cfg.downsample_factor;
    ensure!(
        s.height % f == 0 && s.width % f == 0 && s.height > 0 && s.width > 0,
        "image dims {}x{} must be positive multiples of {f}; pad first",
        s.height,
        s.width
    );
    Ok(())
}

fn network_input(params: &ParameterSet, noisy: &Tensor4, maps: &[NoiseLevelMap]) -> Result<Tensor4> {
    let f = params.config.downsample_factor;
    let sub = space_to_depth(noisy, f)?;
    sub.concat_channels(&map_channel(maps, noisy.shape(), f)?)
}

fn check_finite(t: &Tensor4, layer: usize, what: &str) -> Result<()> {
    if t.all_finite() {
        Ok(())
    } else {
        Err(Error::Training {
            location: format!("layer {layer}"),
            message: format!("non-finite values in {what}"),
        })
    }
}

/// Estimates the clean image from `noisy` (`N x C x H x W`, even H and W).
pub fn forward(
    params: &ParameterSet,
    noisy: &Tensor4,
    maps: &[NoiseLevelMap],
    mode: Mode,
) -> Result<Tensor4> {
    check_inputs(params, noisy)?;
    let mut x = network_input(params, noisy, maps)?;
    for layer in &params.layers {
        x = conv2d_forward(&x, &layer.conv)?;
        if let Some(bn) = &layer.bn {
            x = batchnorm_forward(&x, bn, mode)?.0;
        }
        if layer.relu {
            x = relu_forward(&x);
        }
    }
    depth_to_space(&x, params.config.downsample_factor)
}

/// Result of [`backward`].
#[derive(Debug, Clone)]
pub struct BackwardOutput {
    /// `1/(2N) * sum_i ||F(y_i, M_i) - x_i||^2`.
    pub loss: f64,
    pub grads: ParamGrads,
    /// Batch statistics of every batch-norm layer, for running-average updates.
    pub bn_stats: Vec<Option<BatchStats>>,
    pub output: Tensor4,
}

/// Loss and parameter gradients for one batch. Batch norm layers use batch
/// statistics (train mode).
pub fn backward(
    params: &ParameterSet,
    noisy: &Tensor4,
    maps: &[NoiseLevelMap],
    target: &Tensor4,
) -> Result<BackwardOutput> {
    check_inputs(params, noisy)?;
    ensure!(
        target.shape() == noisy.shape(),
        "target shape {} differs from input shape {}",
        target.shape(),
        noisy.shape()
    );
    let f = params.config.downsample_factor;
    let batch = noisy.shape().batch as f64;

    // Forward, keeping what each backward step needs.
    let mut inputs = Vec::with_capacity(params.layers.len());
    let mut pre_bn = Vec::with_capacity(params.layers.len());
    let mut outputs = Vec::with_capacity(params.layers.len());
    let mut bn_stats = Vec::with_capacity(params.layers.len());
    let mut x = network_input(params, noisy, maps)?;
    for (i, layer) in params.layers.iter().enumerate() {
        let z = conv2d_forward(&x, &layer.conv)?;
        check_finite(&z, i, "convolution output")?;
        let (y, stats, kept) = match &layer.bn {
            Some(bn) => {
                let (y, stats) = batchnorm_forward(&z, bn, Mode::Train)?;
                check_finite(&y, i, "batch norm output")?;
                (y, stats, Some(z))
            }
            None => (z, None, None),
        };
        let y = if layer.relu { relu_forward(&y) } else { y };
        inputs.push(x);
        pre_bn.push(kept);
        bn_stats.push(stats);
        x = y.clone();
        outputs.push(y);
    }
    let output = depth_to_space(&x, f)?;

    let diff = output.zip_map(target, |o, t| o - t)?;
    let loss = diff.sum_sq() / (2.0 * batch);
    let grad_image = diff.map(|d| d / batch);

    let mut grad = space_to_depth(&grad_image, f)?;
    let mut layer_grads = Vec::with_capacity(params.layers.len());
    for (i, layer) in params.layers.iter().enumerate().rev() {
        if layer.relu {
            grad = relu_backward_from_output(&outputs[i], &grad)?;
        }
        let mut bn_grads = None;
        if let (Some(bn), Some(z)) = (&layer.bn, &pre_bn[i]) {
            let g = batchnorm_backward(z, bn, Mode::Train, &grad)?;
            grad = g.input;
            bn_grads = Some((g.gamma, g.beta));
        }
        let cg = if i == 0 {
            conv2d_backward_params(&inputs[i], &layer.conv, &grad)?
        } else {
            conv2d_backward(&inputs[i], &layer.conv, &grad)?
        };
        check_finite(&cg.weights, i, "filter gradient")?;
        layer_grads.push(LayerGrads {
            weights: cg.weights,
            bias: cg.bias,
            bn: bn_grads,
        });
        grad = cg.input;
    }
    layer_grads.reverse();

    Ok(BackwardOutput {
        loss,
        grads: ParamGrads {
            layers: layer_grads,
        },
        bn_stats,
        output,
    })
}

/// Folds every batch norm into the convolution before it.
pub fn merge_batchnorm(params: &ParameterSet) -> Result<ParameterSet> {
    ensure!(!params.bn_merged, "batch norm is already merged");
    params.validate()?;
    let mut merged = params.clone();
    for layer in &mut merged.layers {
        if let Some(bn) = layer.bn.take() {
            layer.conv = batchnorm_fold(&layer.conv, &bn)?;
        }
    }
    merged.bn_merged = true;
    Ok(merged)
}

/// Original spatial size of an image padded by [`pad_to_even`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CropSpec {
    pub height: usize,
    pub width: usize,
}

impl CropSpec {
    pub fn crop(&self, image: &Tensor4) -> Result<Tensor4> {
        let s = image.shape();
        ensure!(
            self.height <= s.height && self.width <= s.width,
            "cannot crop {}x{} to {}x{}",
            s.height,
            s.width,
            self.height,
            self.width
        );
        if (self.height, self.width) == (s.height, s.width) {
            return Ok(image.clone());
        }
        Ok(Tensor4::from_fn(
            Shape4::new(s.batch, s.channels, self.height, self.width),
            |n, c, y, x| image.get(n, c, y, x),
        ))
    }
}

/// Reflect-pads the bottom row and/or right column so both dims are even.
pub fn pad_to_even(image: &Tensor4) -> (Tensor4, CropSpec) {
    pad_to_multiple(image, 2)
}

/// Reflect-pads bottom/right up to the next multiple of `factor`.
pub fn pad_to_multiple(image: &Tensor4, factor: usize) -> (Tensor4, CropSpec) {
    let s = image.shape();
    let crop = CropSpec {
        height: s.height,
        width: s.width,
    };
    let ph = s.height.div_ceil(factor) * factor;
    let pw = s.width.div_ceil(factor) * factor;
    if (ph, pw) == (s.height, s.width) || s.height == 0 || s.width == 0 {
        return (image.clone(), crop);
    }
    use crate::noise::map::reflect_index;
    let padded = Tensor4::from_fn(Shape4::new(s.batch, s.channels, ph, pw), |n, c, y, x| {
        image.get(n, c, reflect_index(y, s.height), reflect_index(x, s.width))
    });
    (padded, crop)
}

/// Denoises an image of any size in inference mode with a full-resolution map.
pub fn denoise(params: &ParameterSet, noisy: &Tensor4, map: &NoiseLevelMap) -> Result<Tensor4> {
    let s = noisy.shape();
    ensure!(
        map.height() == s.height && map.width() == s.width,
        "noise map is {}x{} but the image is {}x{}",
        map.height(),
        map.width(),
        s.height,
        s.width
    );
    let f = params.config.downsample_factor;
    let (padded, crop) = pad_to_multiple(noisy, f);
    let ps = padded.shape();
    let map = map.pad_reflect(ps.height, ps.width)?;
    let out = forward(params, &padded, std::slice::from_ref(&map), Mode::Infer)?;
    crop.crop(&out)
}
