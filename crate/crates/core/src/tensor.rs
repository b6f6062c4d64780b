//! Dense four-axis tensor used for images, activations, filters and gradients.
//!
//! Axis order is always `(batch, channels, height, width)` and storage is
//! row-major in that order, so element `(n, c, y, x)` lives at
//!
//! ```text
//! ((n * channels + c) * height + y) * width + x
//! ```

use std::fmt;

use crate::error::{ensure, Result};

/// Extents of a [`Tensor4`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape4 {
    pub batch: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape4 {
    pub const fn new(batch: usize, channels: usize, height: usize, width: usize) -> Self {
        Self {
            batch,
            channels,
            height,
            width,
        }
    }

    pub const fn len(&self) -> usize {
        self.batch * self.channels * self.height * self.width
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of values in one `(height, width)` plane.
    pub const fn plane(&self) -> usize {
        self.height * self.width
    }

    /// Number of values in one batch entry.
    pub const fn sample_len(&self) -> usize {
        self.channels * self.height * self.width
    }

    #[inline]
    pub const fn index(&self, n: usize, c: usize, y: usize, x: usize) -> usize {
        ((n * self.channels + c) * self.height + y) * self.width + x
    }
}

impl fmt::Display for Shape4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}x{}x{}x{}",
            self.batch, self.channels, self.height, self.width
        )
    }
}

#[derive(Clone, PartialEq)]
pub struct Tensor4 {
    shape: Shape4,
    data: Vec<f64>,
}

impl fmt::Debug for Tensor4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor4")
            .field("shape", &self.shape)
            .field("len", &self.data.len())
            .finish()
    }
}

impl Tensor4 {
    pub fn zeros(shape: Shape4) -> Self {
        Self::filled(shape, 0.0)
    }

    pub fn filled(shape: Shape4, value: f64) -> Self {
        Self {
            shape,
            data: vec![value; shape.len()],
        }
    }

    pub fn from_vec(shape: Shape4, data: Vec<f64>) -> Result<Self> {
        ensure!(
            data.len() == shape.len(),
            "tensor of shape {shape} needs {} values, got {}",
            shape.len(),
            data.len()
        );
        Ok(Self { shape, data })
    }

    pub fn from_fn(shape: Shape4, mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(shape.len());
        for n in 0..shape.batch {
            for c in 0..shape.channels {
                for y in 0..shape.height {
                    for x in 0..shape.width {
                        data.push(f(n, c, y, x));
                    }
                }
            }
        }
        Self { shape, data }
    }

    #[inline]
    pub fn shape(&self) -> Shape4 {
        self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, n: usize, c: usize, y: usize, x: usize) -> f64 {
        self.data[self.shape.index(n, c, y, x)]
    }

    #[inline]
    pub fn set(&mut self, n: usize, c: usize, y: usize, x: usize, value: f64) {
        let i = self.shape.index(n, c, y, x);
        self.data[i] = value;
    }

    /// Contiguous `(height, width)` plane of channel `c` in batch entry `n`.
    pub fn plane(&self, n: usize, c: usize) -> &[f64] {
        let start = self.shape.index(n, c, 0, 0);
        &self.data[start..start + self.shape.plane()]
    }

    pub fn plane_mut(&mut self, n: usize, c: usize) -> &mut [f64] {
        let start = self.shape.index(n, c, 0, 0);
        let len = self.shape.plane();
        &mut self.data[start..start + len]
    }

    /// All values of batch entry `n`.
    pub fn sample(&self, n: usize) -> &[f64] {
        let len = self.shape.sample_len();
        &self.data[n * len..(n + 1) * len]
    }

    /// Copies batch entry `n` into a tensor with batch size 1.
    pub fn sample_tensor(&self, n: usize) -> Tensor4 {
        Tensor4 {
            shape: Shape4 {
                batch: 1,
                ..self.shape
            },
            data: self.sample(n).to_vec(),
        }
    }

    /// Stacks tensors of identical per-sample shape along the batch axis.
    pub fn stack(items: &[Tensor4]) -> Result<Tensor4> {
        ensure!(!items.is_empty(), "cannot stack an empty list of tensors");
        let first = items[0].shape;
        let mut batch = 0;
        let mut data = Vec::new();
        for t in items {
            let s = t.shape;
            ensure!(
                s.channels == first.channels && s.height == first.height && s.width == first.width,
                "cannot stack {s} with {first}"
            );
            batch += s.batch;
            data.extend_from_slice(&t.data);
        }
        Ok(Tensor4 {
            shape: Shape4 { batch, ..first },
            data,
        })
    }

    /// Concatenates two tensors along the channel axis.
    pub fn concat_channels(&self, other: &Tensor4) -> Result<Tensor4> {
        let (a, b) = (self.shape, other.shape);
        ensure!(
            a.batch == b.batch && a.height == b.height && a.width == b.width,
            "channel concat needs equal batch/spatial dims, got {a} and {b}"
        );
        let shape = Shape4::new(a.batch, a.channels + b.channels, a.height, a.width);
        let mut data = Vec::with_capacity(shape.len());
        for n in 0..a.batch {
            data.extend_from_slice(self.sample(n));
            data.extend_from_slice(other.sample(n));
        }
        Ok(Tensor4 { shape, data })
    }

    /// Splits off the first `channels` channels; the inverse of [`Tensor4::concat_channels`].
    pub fn split_channels(&self, channels: usize) -> Result<(Tensor4, Tensor4)> {
        let s = self.shape;
        ensure!(
            channels <= s.channels,
            "cannot split {channels} channels from {s}"
        );
        let head = Shape4::new(s.batch, channels, s.height, s.width);
        let tail = Shape4::new(s.batch, s.channels - channels, s.height, s.width);
        let cut = head.sample_len();
        let mut a = Vec::with_capacity(head.len());
        let mut b = Vec::with_capacity(tail.len());
        for n in 0..s.batch {
            let sample = self.sample(n);
            a.extend_from_slice(&sample[..cut]);
            b.extend_from_slice(&sample[cut..]);
        }
        Ok((
            Tensor4 { shape: head, data: a },
            Tensor4 { shape: tail, data: b },
        ))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor4 {
        Tensor4 {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Tensor4, f: impl Fn(f64, f64) -> f64) -> Result<Tensor4> {
        ensure!(
            self.shape == other.shape,
            "shape mismatch: {} vs {}",
            self.shape,
            other.shape
        );
        Ok(Tensor4 {
            shape: self.shape,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn sum_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Inner product of two equally shaped tensors.
    pub fn dot(&self, other: &Tensor4) -> Result<f64> {
        ensure!(
            self.shape == other.shape,
            "shape mismatch: {} vs {}",
            self.shape,
            other.shape
        );
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn max_abs_diff(&self, other: &Tensor4) -> Result<f64> {
        ensure!(
            self.shape == other.shape,
            "shape mismatch: {} vs {}",
            self.shape,
            other.shape
        );
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
