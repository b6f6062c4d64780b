//! Noise level maps: per-pixel noise standard deviation fields.
//!
//! Values are stored in `sigma / 255` units so they live on the same scale as
//! `[0, 1]` pixel data. Constructors take sigma on the familiar 8-bit scale.

use crate::error::{ensure, Result};
use crate::tensor::{Shape4, Tensor4};

/// Scale between 8-bit sigma values and stored map values.
pub const SIGMA_SCALE: f64 = 255.0;
/// Upper end of the supported noise level range, in 8-bit units.
pub const MAX_SIGMA: f64 = 75.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapKind {
    Uniform,
    Gradient,
    Anchored,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RampAxis {
    /// Sigma grows from left to right.
    Horizontal,
    /// Sigma grows from top to bottom.
    Vertical,
}

/// A user-chosen noise level at one pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionAnchor {
    pub row: usize,
    pub col: usize,
    /// Noise level on the 8-bit scale, within `[0, 75]`.
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseLevelMap {
    height: usize,
    width: usize,
    values: Vec<f64>,
    kind: MapKind,
}

impl NoiseLevelMap {
    /// Builds a map from raw values already in `sigma / 255` units.
    pub fn custom(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        ensure!(
            values.len() == height * width,
            "noise map {height}x{width} needs {} values, got {}",
            height * width,
            values.len()
        );
        ensure!(
            values.iter().all(|v| v.is_finite() && *v >= 0.0),
            "noise map values must be finite and non-negative"
        );
        Ok(Self {
            height,
            width,
            values,
            kind: MapKind::Custom,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn is_uniform(&self) -> bool {
        self.values.windows(2).all(|w| w[0] == w[1])
    }

    /// Single-channel `1 x 1 x height x width` tensor view of the map.
    pub fn to_tensor(&self) -> Tensor4 {
        Tensor4::from_vec(Shape4::new(1, 1, self.height, self.width), self.values.clone())
            .expect("map length matches its dims")
    }

    /// Bilinear resampling to `height / factor x width / factor`, sampling at
    /// pixel centers. For factor 2 this is the mean of each 2x2 block.
    pub fn downsample_bilinear(&self, factor: usize) -> Result<NoiseLevelMap> {
        ensure!(factor >= 1, "downsampling factor must be at least 1");
        ensure!(
            self.height % factor == 0 && self.width % factor == 0,
            "map {}x{} is not divisible by {factor}",
            self.height,
            self.width
        );
        let (oh, ow) = (self.height / factor, self.width / factor);
        let rows: Vec<(usize, usize, f64)> =
            (0..oh).map(|y| bilinear_taps(y, factor, self.height)).collect();
        let cols: Vec<(usize, usize, f64)> =
            (0..ow).map(|x| bilinear_taps(x, factor, self.width)).collect();
        let mut values = Vec::with_capacity(oh * ow);
        for &(y0, y1, fy) in &rows {
            for &(x0, x1, fx) in &cols {
                let top = (1.0 - fx) * self.get(y0, x0) + fx * self.get(y0, x1);
                let bottom = (1.0 - fx) * self.get(y1, x0) + fx * self.get(y1, x1);
                values.push((1.0 - fy) * top + fy * bottom);
            }
        }
        Ok(NoiseLevelMap {
            height: oh,
            width: ow,
            values,
            kind: self.kind,
        })
    }

    /// Reflect-pads the bottom/right edges to `height x width`, mirroring how
    /// images are padded before denoising.
    pub fn pad_reflect(&self, height: usize, width: usize) -> Result<NoiseLevelMap> {
        ensure!(
            height >= self.height && width >= self.width,
            "cannot pad a {}x{} map down to {height}x{width}",
            self.height,
            self.width
        );
        ensure!(self.height > 0 && self.width > 0, "cannot pad an empty map");
        let mut values = Vec::with_capacity(height * width);
        for y in 0..height {
            let sy = reflect_index(y, self.height);
            for x in 0..width {
                values.push(self.get(sy, reflect_index(x, self.width)));
            }
        }
        Ok(NoiseLevelMap {
            height,
            width,
            values,
            kind: self.kind,
        })
    }
}

/// Mirrors an out-of-range index about the last valid position (no edge repeat).
pub(crate) fn reflect_index(i: usize, len: usize) -> usize {
    if i < len {
        return i;
    }
    if len == 1 {
        return 0;
    }
    let period = 2 * (len - 1);
    let m = i % period;
    if m < len {
        m
    } else {
        period - m
    }
}

/// Source rows and blend weight for output index `i` of a bilinear downsample.
fn bilinear_taps(i: usize, factor: usize, len: usize) -> (usize, usize, f64) {
    let src = ((i as f64 + 0.5) * factor as f64 - 0.5).max(0.0);
    let lo = (src.floor() as usize).min(len - 1);
    let hi = (lo + 1).min(len - 1);
    (lo, hi, src - lo as f64)
}

fn check_sigma(sigma: f64) -> Result<()> {
    ensure!(
        sigma.is_finite() && sigma >= 0.0,
        "noise level must be finite and non-negative, got {sigma}"
    );
    Ok(())
}

/// Constant map with every value `sigma / 255`.
pub fn uniform_map(height: usize, width: usize, sigma: f64) -> Result<NoiseLevelMap> {
    check_sigma(sigma)?;
    Ok(NoiseLevelMap {
        height,
        width,
        values: vec![sigma / SIGMA_SCALE; height * width],
        kind: MapKind::Uniform,
    })
}

/// Linear ramp from `sigma_lo` at the first row/column to `sigma_hi` at the last.
pub fn gradient_map(
    height: usize,
    width: usize,
    sigma_lo: f64,
    sigma_hi: f64,
    axis: RampAxis,
) -> Result<NoiseLevelMap> {
    check_sigma(sigma_lo)?;
    check_sigma(sigma_hi)?;
    ensure!(
        sigma_lo <= sigma_hi,
        "gradient map needs sigma_lo <= sigma_hi, got {sigma_lo} > {sigma_hi}"
    );
    let len = match axis {
        RampAxis::Horizontal => width,
        RampAxis::Vertical => height,
    };
    let ramp: Vec<f64> = (0..len)
        .map(|i| {
            if len <= 1 || i == 0 {
                sigma_lo
            } else if i == len - 1 {
                sigma_hi
            } else {
                sigma_lo + (sigma_hi - sigma_lo) * i as f64 / (len - 1) as f64
            }
        })
        .map(|s| s / SIGMA_SCALE)
        .collect();
    let mut values = Vec::with_capacity(height * width);
    for y in 0..height {
        for x in 0..width {
            values.push(match axis {
                RampAxis::Horizontal => ramp[x],
                RampAxis::Vertical => ramp[y],
            });
        }
    }
    Ok(NoiseLevelMap {
        height,
        width,
        values,
        kind: MapKind::Gradient,
    })
}

/// Inverse-distance-weighted (power 2) interpolation between anchors. Anchor
/// pixels take their own sigma exactly; results are clamped to `[0, 75] / 255`.
pub fn anchored_map(height: usize, width: usize, anchors: &[RegionAnchor]) -> Result<NoiseLevelMap> {
    ensure!(!anchors.is_empty(), "an anchored map needs at least one anchor");
    for a in anchors {
        ensure!(
            a.row < height && a.col < width,
            "anchor ({}, {}) lies outside the {height}x{width} image",
            a.row,
            a.col
        );
        ensure!(
            a.sigma.is_finite() && (0.0..=MAX_SIGMA).contains(&a.sigma),
            "anchor sigma {} is outside [0, {MAX_SIGMA}]",
            a.sigma
        );
    }
    // Identical anchors must reproduce the uniform map bit for bit.
    if anchors.iter().all(|a| a.sigma == anchors[0].sigma) {
        let mut map = uniform_map(height, width, anchors[0].sigma)?;
        map.kind = MapKind::Anchored;
        return Ok(map);
    }
    // Identical anchors must reproduce the uniform map bit for bit.
    if anchors.iter().all(|a| a.sigma == anchors[0].sigma) {
        let mut map = uniform_map(height, width, anchors[0].sigma)?;
        map.kind = MapKind::Anchored;
        return Ok(map);
    }
    let mut values = Vec::with_capacity(height * width);
    for y in 0..height {
        for x in 0..width {
            let sigma = if let Some(hit) = anchors.iter().find(|a| a.row == y && a.col == x) {
                hit.sigma
            } else {
                let (mut num, mut den) = (0.0, 0.0);
                for a in anchors {
                    let dy = y as f64 - a.row as f64;
                    let dx = x as f64 - a.col as f64;
                    let w = 1.0 / (dy * dy + dx * dx);
                    num += w * a.sigma;
                    den += w;
                }
                num / den
            };
            values.push(sigma.clamp(0.0, MAX_SIGMA) / SIGMA_SCALE);
        }
    }
    Ok(NoiseLevelMap {
        height,
        width,
        values,
        kind: MapKind::Anchored,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_values() {
        assert!(uniform_map(4, 5, 0.0).unwrap().values().iter().all(|&v| v == 0.0));
        let m = uniform_map(4, 5, 25.0).unwrap();
        assert!(m.values().iter().all(|&v| v == 25.0 / 255.0));
        assert!(uniform_map(2, 2, -1.0).is_err());
    }

    #[test]
    fn single_anchor_is_uniform() {
        let a = [RegionAnchor {
            row: 3,
            col: 1,
            sigma: 25.0,
        }];
        let m = anchored_map(6, 7, &a).unwrap();
        assert_eq!(m.values(), uniform_map(6, 7, 25.0).unwrap().values());
        assert!((m.mean() - 25.0 / 255.0).abs() < 1e-15);
    }

    #[test]
    fn two_anchor_midpoint_by_symmetry() {
        let a = [
            RegionAnchor { row: 0, col: 0, sigma: 10.0 },
            RegionAnchor { row: 0, col: 10, sigma: 30.0 },
        ];
        let m = anchored_map(1, 11, &a).unwrap();
        assert!((m.get(0, 5) - 20.0 / 255.0).abs() < 1e-15);
        assert_eq!(m.get(0, 0), 10.0 / 255.0);
        assert_eq!(m.get(0, 10), 30.0 / 255.0);
    }

    #[test]
    fn anchors_are_exact_and_validated() {
        let a = [
            RegionAnchor { row: 1, col: 2, sigma: 5.0 },
            RegionAnchor { row: 7, col: 0, sigma: 35.0 },
            RegionAnchor { row: 4, col: 9, sigma: 75.0 },
        ];
        let m = anchored_map(8, 10, &a).unwrap();
        for anchor in &a {
            assert_eq!(m.get(anchor.row, anchor.col), anchor.sigma / 255.0);
        }
        assert!(m.values().iter().all(|&v| (5.0 / 255.0..=75.0 / 255.0).contains(&v)));
        assert!(anchored_map(8, 10, &[]).is_err());
        assert!(anchored_map(8, 10, &[RegionAnchor { row: 8, col: 0, sigma: 1.0 }]).is_err());
        assert!(anchored_map(8, 10, &[RegionAnchor { row: 0, col: 0, sigma: 80.0 }]).is_err());
    }

    #[test]
    fn gradient_endpoints_and_mean() {
        let m = gradient_map(6, 11, 5.0, 50.0, RampAxis::Horizontal).unwrap();
        assert_eq!(m.get(3, 0), 5.0 / 255.0);
        assert_eq!(m.get(3, 10), 50.0 / 255.0);
        assert!((m.mean() - 27.5 / 255.0).abs() < 1e-15);
        let v = gradient_map(9, 4, 0.0, 40.0, RampAxis::Vertical).unwrap();
        assert_eq!(v.get(0, 2), 0.0);
        assert_eq!(v.get(8, 2), 40.0 / 255.0);
        let flat = gradient_map(4, 4, 15.0, 15.0, RampAxis::Vertical).unwrap();
        assert_eq!(flat.values(), uniform_map(4, 4, 15.0).unwrap().values());
        assert!(gradient_map(4, 4, 20.0, 10.0, RampAxis::Horizontal).is_err());
    }

    #[test]
    fn downsample_averages_blocks() {
        let m = NoiseLevelMap::custom(2, 2, vec![0.1, 0.2, 0.3, 0.6]).unwrap();
        let d = m.downsample_bilinear(2).unwrap();
        assert_eq!((d.height(), d.width()), (1, 1));
        assert!((d.get(0, 0) - 0.3).abs() < 1e-15);
        let c = uniform_map(6, 8, 30.0).unwrap().downsample_bilinear(2).unwrap();
        assert!(c.values().iter().all(|&v| (v - 30.0 / 255.0).abs() < 1e-16));
        assert!(m.downsample_bilinear(3).is_err());
    }

    #[test]
    fn downsampled_ramp_stays_linear() {
        let w = 16;
        let m = gradient_map(4, w, 5.0, 50.0, RampAxis::Horizontal).unwrap();
        let d = m.downsample_bilinear(2).unwrap();
        let row: Vec<f64> = (0..d.width()).map(|x| d.get(1, x)).collect();
        for win in row.windows(3) {
            assert!((win[2] - 2.0 * win[1] + win[0]).abs() < 1e-15);
        }
        // Closed form: block mean of the ramp is lo + step * (2x + 0.5).
        let step = 45.0 / 255.0 / (w - 1) as f64;
        for (x, v) in row.iter().enumerate() {
            let expected = 5.0 / 255.0 + step * (2.0 * x as f64 + 0.5);
            assert!((v - expected).abs() < 1e-15);
        }
        assert!((row[0] - 5.0 / 255.0).abs() <= step);
        assert!((row[row.len() - 1] - 50.0 / 255.0).abs() <= step);
    }

    #[test]
    fn reflect_padding_mirrors_without_repeat() {
        assert_eq!(reflect_index(5, 5), 3);
        assert_eq!(reflect_index(4, 5), 4);
        assert_eq!(reflect_index(1, 1), 0);
        let m = NoiseLevelMap::custom(1, 3, vec![0.1, 0.2, 0.3]).unwrap();
        let p = m.pad_reflect(2, 4).unwrap();
        assert_eq!(p.values(), &[0.1, 0.2, 0.3, 0.2, 0.1, 0.2, 0.3, 0.2]);
    }

    #[test]
    fn custom_rejects_negative_values() {
        assert!(NoiseLevelMap::custom(1, 2, vec![0.1, -0.1]).is_err());
        assert!(NoiseLevelMap::custom(1, 2, vec![0.1]).is_err());
    }
}
