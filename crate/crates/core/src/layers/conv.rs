//! 3x3 convolution, stride 1, zero padding 1.
//!
//! The kernels walk the image one output row at a time and apply each filter
//! tap as an `axpy` over a contiguous row slice. Batch entries are processed
//! in parallel; every per-sample reduction is summed in batch order so the
//! result does not depend on the thread count.

use rayon::prelude::*;

use crate::error::{ensure, Result};
use crate::tensor::{Shape4, Tensor4};

pub const KERNEL: usize = 3;
const TAPS: usize = KERNEL * KERNEL;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    /// Filter bank of shape `(out_channels, in_channels, 3, 3)`.
    pub weights: Tensor4,
    pub bias: Vec<f64>,
}

impl ConvLayer {
    pub fn new(weights: Tensor4, bias: Vec<f64>) -> Result<Self> {
        let layer = Self { weights, bias };
        layer.validate()?;
        Ok(layer)
    }

    pub fn zeros(out_channels: usize, in_channels: usize) -> Self {
        Self {
            weights: Tensor4::zeros(Shape4::new(out_channels, in_channels, KERNEL, KERNEL)),
            bias: vec![0.0; out_channels],
        }
    }

    pub fn out_channels(&self) -> usize {
        self.weights.shape().batch
    }

    pub fn in_channels(&self) -> usize {
        self.weights.shape().channels
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.weights.shape();
        ensure!(
            s.height == KERNEL && s.width == KERNEL,
            "convolution kernels must be 3x3, got {}x{}",
            s.height,
            s.width
        );
        ensure!(
            self.bias.len() == s.batch,
            "bias has {} entries for {} filters",
            self.bias.len(),
            s.batch
        );
        Ok(())
    }

    #[inline]
    fn tap(&self, oc: usize, ic: usize) -> &[f64] {
        let start = (oc * self.in_channels() + ic) * TAPS;
        &self.weights.data()[start..start + TAPS]
    }
}

/// Gradients returned by [`conv2d_backward`].
#[derive(Debug, Clone)]
pub struct ConvGrads {
    pub input: Tensor4,
    pub weights: Tensor4,
    pub bias: Vec<f64>,
}

/// Valid output range `[lo, hi)` along one axis for a tap offset `d` in {-1, 0, 1}.
#[inline]
fn span(len: usize, d: isize) -> (usize, usize) {
    let lo = if d < 0 { 1 } else { 0 };
    let hi = if d > 0 { len.saturating_sub(1) } else { len };
    (lo, hi.max(lo))
}

#[inline]
fn axpy(dst: &mut [f64], a: f64, src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += a * s;
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Accumulates `w * shift(src, dy, dx)` into `dst` for one filter tap.
#[inline]
fn accumulate_tap(dst: &mut [f64], src: &[f64], h: usize, w: usize, dy: isize, dx: isize, wv: f64) {
    let (y0, y1) = span(h, dy);
    let (x0, x1) = span(w, dx);
    for y in y0..y1 {
        let sy = (y as isize + dy) as usize;
        let sx0 = (x0 as isize + dx) as usize;
        let n = x1 - x0;
        axpy(
            &mut dst[y * w + x0..y * w + x0 + n],
            wv,
            &src[sy * w + sx0..sy * w + sx0 + n],
        );
    }
}

/// Adjoint of [`accumulate_tap`]: scatters `w * grad` back onto the shifted source.
#[inline]
fn scatter_tap(dst: &mut [f64], grad: &[f64], h: usize, w: usize, dy: isize, dx: isize, wv: f64) {
    let (y0, y1) = span(h, dy);
    let (x0, x1) = span(w, dx);
    for y in y0..y1 {
        let sy = (y as isize + dy) as usize;
        let sx0 = (x0 as isize + dx) as usize;
        let n = x1 - x0;
        axpy(
            &mut dst[sy * w + sx0..sy * w + sx0 + n],
            wv,
            &grad[y * w + x0..y * w + x0 + n],
        );
    }
}

#[inline]
fn correlate_tap(grad: &[f64], src: &[f64], h: usize, w: usize, dy: isize, dx: isize) -> f64 {
    let (y0, y1) = span(h, dy);
    let (x0, x1) = span(w, dx);
    let mut acc = 0.0;
    for y in y0..y1 {
        let sy = (y as isize + dy) as usize;
        let sx0 = (x0 as isize + dx) as usize;
        let n = x1 - x0;
        acc += dot(
            &grad[y * w + x0..y * w + x0 + n],
            &src[sy * w + sx0..sy * w + sx0 + n],
        );
    }
    acc
}

#[inline]
fn offsets(t: usize) -> (isize, isize) {
    ((t / KERNEL) as isize - 1, (t % KERNEL) as isize - 1)
}

fn check_input(input: &Tensor4, layer: &ConvLayer) -> Result<()> {
    layer.validate()?;
    ensure!(
        input.shape().channels == layer.in_channels(),
        "convolution expects {} input channels, got {}",
        layer.in_channels(),
        input.shape().channels
    );
    Ok(())
}

pub fn conv2d_forward(input: &Tensor4, layer: &ConvLayer) -> Result<Tensor4> {
    check_input(input, layer)?;
    let s = input.shape();
    let (h, w) = (s.height, s.width);
    let plane = s.plane();
    let out_shape = Shape4::new(s.batch, layer.out_channels(), h, w);
    let mut out = Tensor4::zeros(out_shape);
    if out_shape.is_empty() {
        return Ok(out);
    }

    out.data_mut()
        .par_chunks_mut(out_shape.sample_len())
        .enumerate()
        .for_each(|(n, out_sample)| {
            let in_sample = input.sample(n);
            for (oc, out_plane) in out_sample.chunks_mut(plane).enumerate() {
                out_plane.fill(layer.bias[oc]);
                for ic in 0..s.channels {
                    let src = &in_sample[ic * plane..(ic + 1) * plane];
                    for (t, &wv) in layer.tap(oc, ic).iter().enumerate() {
                        if wv != 0.0 {
                            let (dy, dx) = offsets(t);
                            accumulate_tap(out_plane, src, h, w, dy, dx, wv);
                        }
                    }
                }
            }
        });
    Ok(out)
}

/// Gradients of `sum(grad_out * conv2d_forward(input, layer))` with respect to
/// the input, the filters and the biases.
pub fn conv2d_backward(input: &Tensor4, layer: &ConvLayer, grad_out: &Tensor4) -> Result<ConvGrads> {
    backward_impl(input, layer, grad_out, true)
}

/// Same as [`conv2d_backward`] but skips the input gradient, which the first
/// network layer never needs. The returned `input` field is empty.
pub fn conv2d_backward_params(
    input: &Tensor4,
    layer: &ConvLayer,
    grad_out: &Tensor4,
) -> Result<ConvGrads> {
    backward_impl(input, layer, grad_out, false)
}

fn backward_impl(
    input: &Tensor4,
    layer: &ConvLayer,
    grad_out: &Tensor4,
    need_input: bool,
) -> Result<ConvGrads> {
    check_input(input, layer)?;
    let s = input.shape();
    let expected = Shape4::new(s.batch, layer.out_channels(), s.height, s.width);
    ensure!(
        grad_out.shape() == expected,
        "output gradient has shape {}, expected {expected}",
        grad_out.shape()
    );
    let (h, w) = (s.height, s.width);
    let plane = s.plane();
    let (oc_n, ic_n) = (layer.out_channels(), layer.in_channels());

    let mut grad_input = if need_input {
        Tensor4::zeros(s)
    } else {
        Tensor4::zeros(Shape4::new(0, 0, 0, 0))
    };

    // Per-sample filter/bias gradients, reduced in batch order afterwards.
    let per_sample: Vec<(Vec<f64>, Vec<f64>)> = (0..s.batch)
        .into_par_iter()
        .map(|n| {
            let in_sample = input.sample(n);
            let g_sample = grad_out.sample(n);
            let mut gw = vec![0.0; oc_n * ic_n * TAPS];
            let mut gb = vec![0.0; oc_n];
            for oc in 0..oc_n {
                let g = &g_sample[oc * plane..(oc + 1) * plane];
                gb[oc] = g.iter().sum();
                for ic in 0..ic_n {
                    let src = &in_sample[ic * plane..(ic + 1) * plane];
                    let base = (oc * ic_n + ic) * TAPS;
                    for t in 0..TAPS {
                        let (dy, dx) = offsets(t);
                        gw[base + t] = correlate_tap(g, src, h, w, dy, dx);
                    }
                }
            }
            (gw, gb)
        })
        .collect();

    if need_input && !s.is_empty() {
        grad_input
            .data_mut()
            .par_chunks_mut(s.sample_len())
            .enumerate()
            .for_each(|(n, gin_sample)| {
                let g_sample = grad_out.sample(n);
                for oc in 0..oc_n {
                    let g = &g_sample[oc * plane..(oc + 1) * plane];
                    for ic in 0..ic_n {
                        let dst = &mut gin_sample[ic * plane..(ic + 1) * plane];
                        for (t, &wv) in layer.tap(oc, ic).iter().enumerate() {
                            if wv != 0.0 {
                                let (dy, dx) = offsets(t);
                                scatter_tap(dst, g, h, w, dy, dx, wv);
                            }
                        }
                    }
                }
            });
    }

    let mut grad_w = Tensor4::zeros(layer.weights.shape());
    let mut grad_b = vec![0.0; oc_n];
    for (gw, gb) in &per_sample {
        for (acc, v) in grad_w.data_mut().iter_mut().zip(gw) {
            *acc += v;
        }
        for (acc, v) in grad_b.iter_mut().zip(gb) {
            *acc += v;
        }
    }

    Ok(ConvGrads {
        input: grad_input,
        weights: grad_w,
        bias: grad_b,
    })
}
