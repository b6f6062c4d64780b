//! Per-channel batch normalization and its folding into a preceding convolution.

use crate::error::{ensure, Result};
use crate::layers::conv::ConvLayer;
use crate::tensor::Tensor4;

pub const DEFAULT_EPSILON: f64 = 1e-5;
/// Weight of the previous running statistic in the moving average.
pub const DEFAULT_MOMENTUM: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Normalize with the statistics of the current batch.
    Train,
    /// Normalize with the running statistics.
    Infer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormLayer {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub epsilon: f64,
    pub momentum: f64,
}

/// Per-channel mean and biased variance of one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct BatchNormGrads {
    pub input: Tensor4,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

impl BatchNormLayer {
    /// Identity-initialized layer: gamma 1, beta 0, running statistics (0, 1).
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: vec![1.0; channels],
            beta: vec![0.0; channels],
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            epsilon: DEFAULT_EPSILON,
            momentum: DEFAULT_MOMENTUM,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.channels();
        ensure!(
            self.beta.len() == c && self.running_mean.len() == c && self.running_var.len() == c,
            "batch norm parameter lengths disagree (gamma {c}, beta {}, mean {}, var {})",
            self.beta.len(),
            self.running_mean.len(),
            self.running_var.len()
        );
        ensure!(
            self.epsilon > 0.0 && self.epsilon.is_finite(),
            "batch norm epsilon must be positive, got {}",
            self.epsilon
        );
        ensure!(
            (0.0..=1.0).contains(&self.momentum),
            "batch norm momentum must lie in [0, 1], got {}",
            self.momentum
        );
        for (ch, v) in self.running_var.iter().enumerate() {
            ensure!(
                v + self.epsilon > 0.0 && v.is_finite(),
                "running variance of channel {ch} is {v}"
            );
        }
        Ok(())
    }

    /// Blends batch statistics into the running estimates.
    pub fn update_running(&mut self, stats: &BatchStats) {
        let m = self.momentum;
        for (r, b) in self.running_mean.iter_mut().zip(&stats.mean) {
            *r = m * *r + (1.0 - m) * b;
        }
        for (r, b) in self.running_var.iter_mut().zip(&stats.var) {
            *r = m * *r + (1.0 - m) * b;
        }
    }

    /// Per-channel `(scale, shift)` such that infer mode computes `scale * x + shift`.
    pub fn inference_affine(&self) -> (Vec<f64>, Vec<f64>) {
        (0..self.channels())
            .map(|c| {
                let scale = self.gamma[c] / (self.running_var[c] + self.epsilon).sqrt();
                (scale, self.beta[c] - scale * self.running_mean[c])
            })
            .unzip()
    }
}

fn check(input: &Tensor4, layer: &BatchNormLayer) -> Result<()> {
    layer.validate()?;
    ensure!(
        input.shape().channels == layer.channels(),
        "batch norm has {} channels, input has {}",
        layer.channels(),
        input.shape().channels
    );
    Ok(())
}

pub fn batch_stats(input: &Tensor4) -> Result<BatchStats> {
    let s = input.shape();
    let count = s.batch * s.plane();
    ensure!(
        count >= 2,
        "train-mode batch norm needs at least 2 values per channel, got {count}"
    );
    let mut mean = vec![0.0; s.channels];
    let mut var = vec![0.0; s.channels];
    for c in 0..s.channels {
        let mut sum = 0.0;
        for n in 0..s.batch {
            sum += input.plane(n, c).iter().sum::<f64>();
        }
        let mu = sum / count as f64;
        let mut sq = 0.0;
        for n in 0..s.batch {
            sq += input.plane(n, c).iter().map(|v| (v - mu) * (v - mu)).sum::<f64>();
        }
        mean[c] = mu;
        var[c] = sq / count as f64;
    }
    Ok(BatchStats { mean, var })
}

fn apply_affine(input: &Tensor4, scale: &[f64], shift: &[f64]) -> Tensor4 {
    let s = input.shape();
    let mut out = input.clone();
    for n in 0..s.batch {
        for c in 0..s.channels {
            let (a, b) = (scale[c], shift[c]);
            for v in out.plane_mut(n, c) {
                *v = a * *v + b;
            }
        }
    }
    out
}

/// Normalizes `input` per channel. Train mode also returns the batch statistics
/// so the caller can fold them into the running estimates.
pub fn batchnorm_forward(
    input: &Tensor4,
    layer: &BatchNormLayer,
    mode: Mode,
) -> Result<(Tensor4, Option<BatchStats>)> {
    check(input, layer)?;
    match mode {
        Mode::Infer => {
            let (scale, shift) = layer.inference_affine();
            Ok((apply_affine(input, &scale, &shift), None))
        }
        Mode::Train => {
            let stats = batch_stats(input)?;
            let (scale, shift): (Vec<f64>, Vec<f64>) = (0..layer.channels())
                .map(|c| {
                    let inv = 1.0 / (stats.var[c] + layer.epsilon).sqrt();
                    let scale = layer.gamma[c] * inv;
                    (scale, layer.beta[c] - scale * stats.mean[c])
                })
                .unzip();
            Ok((apply_affine(input, &scale, &shift), Some(stats)))
        }
    }
}

pub fn batchnorm_backward(
    input: &Tensor4,
    layer: &BatchNormLayer,
    mode: Mode,
    grad_out: &Tensor4,
) -> Result<BatchNormGrads> {
    check(input, layer)?;
    ensure!(
        grad_out.shape() == input.shape(),
        "output gradient has shape {}, expected {}",
        grad_out.shape(),
        input.shape()
    );
    let s = input.shape();
    let channels = s.channels;
    let mut grad_in = Tensor4::zeros(s);
    let mut grad_gamma = vec![0.0; channels];
    let mut grad_beta = vec![0.0; channels];

    let (mean, var) = match mode {
        Mode::Train => {
            let st = batch_stats(input)?;
            (st.mean, st.var)
        }
        Mode::Infer => (layer.running_mean.clone(), layer.running_var.clone()),
    };
    let count = (s.batch * s.plane()) as f64;

    for c in 0..channels {
        let inv = 1.0 / (var[c] + layer.epsilon).sqrt();
        let mu = mean[c];
        let mut sum_g = 0.0;
        let mut sum_g_xhat = 0.0;
        for n in 0..s.batch {
            for (&x, &g) in input.plane(n, c).iter().zip(grad_out.plane(n, c)) {
                sum_g += g;
                sum_g_xhat += g * (x - mu) * inv;
            }
        }
        grad_beta[c] = sum_g;
        grad_gamma[c] = sum_g_xhat;
        let gamma = layer.gamma[c];
        for n in 0..s.batch {
            let x_plane = input.plane(n, c);
            let g_plane = grad_out.plane(n, c);
            let dst = grad_in.plane_mut(n, c);
            match mode {
                Mode::Infer => {
                    for (d, &g) in dst.iter_mut().zip(g_plane) {
                        *d = gamma * inv * g;
                    }
                }
                Mode::Train => {
                    // dx = gamma * inv / M * (M g - sum(g) - xhat * sum(g xhat))
                    let k = gamma * inv / count;
                    for ((d, &g), &x) in dst.iter_mut().zip(g_plane).zip(x_plane) {
                        let xhat = (x - mu) * inv;
                        *d = k * (count * g - sum_g - xhat * sum_g_xhat);
                    }
                }
            }
        }
    }

    Ok(BatchNormGrads {
        input: grad_in,
        gamma: grad_gamma,
        beta: grad_beta,
    })
}

/// Returns a convolution computing `bn(conv(x))` in inference mode.
pub fn batchnorm_fold(conv: &ConvLayer, bn: &BatchNormLayer) -> Result<ConvLayer> {
    conv.validate()?;
    bn.validate()?;
    ensure!(
        bn.channels() == conv.out_channels(),
        "batch norm has {} channels but the convolution produces {}",
        bn.channels(),
        conv.out_channels()
    );
    let (scale, shift) = bn.inference_affine();
    let mut folded = conv.clone();
    let per_filter = conv.weights.shape().sample_len();
    for (oc, filter) in folded.weights.data_mut().chunks_mut(per_filter).enumerate() {
        for w in filter {
            *w *= scale[oc];
        }
    }
    for (oc, b) in folded.bias.iter_mut().enumerate() {
        *b = scale[oc] * *b + shift[oc];
    }
    Ok(folded)
}
