//! Additive white Gaussian noise, optionally clipped and quantized to 8 bits.
//!
//! Noise is drawn from a ChaCha8 stream seeded with the spec seed, one
//! standard normal sample per tensor element in storage order, and scaled by
//! the map value at that pixel: `y = x + v1 * M`.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::image::quantize;
use crate::error::{ensure, Result};
use crate::noise::map::NoiseLevelMap;
use crate::tensor::Tensor4;

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    pub map: NoiseLevelMap,
    /// Clamp to `[0, 1]` and quantize to 8-bit levels after adding noise.
    pub clipped: bool,
    pub seed: u64,
}

pub fn add_awgn(clean: &Tensor4, spec: &NoiseSpec) -> Result<Tensor4> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    add_awgn_with_rng(clean, &spec.map, spec.clipped, &mut rng)
}

/// Same as [`add_awgn`] with a caller-owned generator. The map is shared by
/// every channel and batch entry.
pub fn add_awgn_with_rng<R: Rng + ?Sized>(
    clean: &Tensor4,
    map: &NoiseLevelMap,
    clipped: bool,
    rng: &mut R,
) -> Result<Tensor4> {
    let s = clean.shape();
    ensure!(
        map.height() == s.height && map.width() == s.width,
        "noise map is {}x{} but the image is {}x{}",
        map.height(),
        map.width(),
        s.height,
        s.width
    );
    ensure!(
        map.values().iter().all(|v| *v >= 0.0),
        "noise map contains negative values"
    );
    let mut noisy = clean.clone();
    let sigma = map.values();
    for n in 0..s.batch {
        for c in 0..s.channels {
            for (v, &m) in noisy.plane_mut(n, c).iter_mut().zip(sigma) {
                let unit: f64 = rng.sample(StandardNormal);
                *v += unit * m;
            }
        }
    }
    if clipped {
        for v in noisy.data_mut() {
            *v = f64::from(quantize(*v)) / 255.0;
        }
    }
    Ok(noisy)
}

/// Adds noise with a single scalar level (in `[0, 1]` units) to every element.
pub(crate) fn add_scalar_awgn<R: Rng + ?Sized>(
    clean: &mut [f64],
    sigma: f64,
    clipped: bool,
    rng: &mut R,
) {
    for v in clean.iter_mut() {
        let unit: f64 = rng.sample(StandardNormal);
        *v += unit * sigma;
        if clipped {
            *v = f64::from(quantize(*v)) / 255.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::map::{gradient_map, uniform_map, RampAxis};
    use crate::tensor::Shape4;

    fn mean_std(values: impl Iterator<Item = f64>) -> (f64, f64) {
        let v: Vec<f64> = values.collect();
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        (mean, var.sqrt())
    }

    #[test]
    fn zero_map_leaves_image_untouched() {
        let x = Tensor4::from_fn(Shape4::new(1, 3, 8, 8), |_, c, y, x| (c + y + x) as f64 / 20.0);
        let spec = NoiseSpec {
            map: uniform_map(8, 8, 0.0).unwrap(),
            clipped: false,
            seed: 9,
        };
        assert_eq!(add_awgn(&x, &spec).unwrap(), x);
    }

    #[test]
    fn empirical_std_matches_sigma() {
        let x = Tensor4::filled(Shape4::new(1, 1, 256, 256), 0.5);
        let spec = NoiseSpec {
            map: uniform_map(256, 256, 25.0).unwrap(),
            clipped: false,
            seed: 1,
        };
        let y = add_awgn(&x, &spec).unwrap();
        let (mean, std) = mean_std(y.data().iter().map(|v| v - 0.5));
        let target = 25.0 / 255.0;
        assert!((std - target).abs() / target < 0.02, "std {std}");
        assert!(mean.abs() < 4.0 * target / 256.0);
    }

    #[test]
    fn clipping_biases_white_pixels_downward() {
        let x = Tensor4::filled(Shape4::new(1, 1, 200, 200), 1.0);
        let spec = NoiseSpec {
            map: uniform_map(200, 200, 50.0).unwrap(),
            clipped: true,
            seed: 2,
        };
        let y = add_awgn(&x, &spec).unwrap();
        let (mean, _) = mean_std(y.data().iter().map(|v| v - 1.0));
        assert!(mean < 0.0);
        assert!(y.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert!(y.data().iter().all(|&v| (v * 255.0 - (v * 255.0).round()).abs() < 1e-9));
    }

    #[test]
    fn same_seed_same_noise() {
        let x = Tensor4::filled(Shape4::new(1, 1, 16, 16), 0.2);
        let spec = NoiseSpec {
            map: uniform_map(16, 16, 30.0).unwrap(),
            clipped: false,
            seed: 77,
        };
        let a = add_awgn(&x, &spec).unwrap();
        let b = add_awgn(&x, &spec).unwrap();
        assert_eq!(a, b);
        let c = add_awgn(&x, &NoiseSpec { seed: 78, ..spec }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn spatially_variant_noise_follows_the_map() {
        let (h, w) = (128, 256);
        let map = gradient_map(h, w, 5.0, 50.0, RampAxis::Horizontal).unwrap();
        let x = Tensor4::zeros(Shape4::new(1, 1, h, w));
        let y = add_awgn(&x, &NoiseSpec { map: map.clone(), clipped: false, seed: 3 }).unwrap();
        // Normalizing by the map recovers unit-variance noise in each strip.
        for strip in [0..32, 112..144, 224..256] {
            let vals = (0..h).flat_map(|r| {
                let y = &y;
                let map = &map;
                strip.clone().map(move |c| y.get(0, 0, r, c) / map.get(r, c))
            });
            let (mean, std) = mean_std(vals);
            assert!(mean.abs() < 0.05, "mean {mean}");
            assert!((std - 1.0).abs() < 0.05, "std {std}");
        }
    }

    #[test]
    fn map_dims_must_match() {
        let x = Tensor4::zeros(Shape4::new(1, 1, 4, 4));
        let spec = NoiseSpec {
            map: uniform_map(4, 5, 10.0).unwrap(),
            clipped: false,
            seed: 0,
        };
        assert!(add_awgn(&x, &spec).is_err());
    }
}
