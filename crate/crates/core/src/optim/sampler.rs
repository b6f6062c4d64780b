use rand::Rng;

use crate::data::{augment8, extract_patch};
use crate::error::{ensure, Result};
use crate::noise::awgn::add_scalar_awgn;
use crate::noise::{uniform_map, NoiseLevelMap};
use crate::optim::TrainPlan;
use crate::tensor::Tensor4;

/// A training batch: noisy inputs, their noise maps and clean targets.
#[derive(Debug, Clone)]
pub struct Batch {
    pub noisy: Tensor4,
    pub maps: Vec<NoiseLevelMap>,
    pub clean: Tensor4,
}

/// Options controlling how patches are drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleOptions {
    pub patch_size: usize,
    pub batch_size: usize,
    pub sigma_range: (f64, f64),
    pub augment: bool,
    pub clipped: bool,
}

impl SampleOptions {
    pub fn new(plan: &TrainPlan, patch_size: usize, augment: bool, clipped: bool) -> Self {
        Self {
            patch_size,
            batch_size: plan.batch_size,
            sigma_range: plan.sigma_range,
            augment,
            clipped,
        }
    }
}

/// Draws a batch. Per patch the random draws are, in order: source image,
/// row, column, augmentation index (if enabled), noise level, then one
/// Gaussian per pixel.
pub fn sample_batch<R: Rng + ?Sized>(
    images: &[Tensor4],
    opts: &SampleOptions,
    rng: &mut R,
) -> Result<Batch> {
    ensure!(!images.is_empty(), "no training images");
    let p = opts.patch_size;
    let channels = images[0].shape().channels;
    for (i, img) in images.iter().enumerate() {
        let s = img.shape();
        ensure!(s.batch == 1, "training image {i} must be a single image");
        ensure!(
            s.channels == channels,
            "training image {i} has {} channels, expected {channels}",
            s.channels
        );
        ensure!(
            s.height >= p && s.width >= p,
            "training image {i} ({}x{}) is smaller than the {p}x{p} patch",
            s.height,
            s.width
        );
    }
    let (lo, hi) = opts.sigma_range;
    let mut clean = Vec::with_capacity(opts.batch_size);
    let mut noisy = Vec::with_capacity(opts.batch_size);
    let mut maps = Vec::with_capacity(opts.batch_size);
    for _ in 0..opts.batch_size {
        let img = &images[rng.gen_range(0..images.len())];
        let s = img.shape();
        let row = rng.gen_range(0..=s.height - p);
        let col = rng.gen_range(0..=s.width - p);
        let mut patch = extract_patch(img, (row, col), p)?;
        if opts.augment {
            patch = augment8(&patch, rng.gen_range(0..8))?;
        }
        let sigma = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
        let mut corrupted = patch.clone();
        add_scalar_awgn(corrupted.data_mut(), sigma / 255.0, opts.clipped, rng);
        maps.push(uniform_map(p, p, sigma)?);
        clean.push(patch);
        noisy.push(corrupted);
    }
    Ok(Batch {
        noisy: Tensor4::stack(&noisy)?,
        maps,
        clean: Tensor4::stack(&clean)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape4;
    use crate::testutil::{random_tensor, rng};

    fn opts() -> SampleOptions {
        SampleOptions {
            patch_size: 8,
            batch_size: 6,
            sigma_range: (10.0, 30.0),
            augment: true,
            clipped: false,
        }
    }

    #[test]
    fn batch_shapes_and_levels() {
        let img = random_tensor(&mut rng(1), Shape4::new(1, 1, 20, 17));
        let b = sample_batch(&[img], &opts(), &mut rng(2)).unwrap();
        assert_eq!(b.noisy.shape(), Shape4::new(6, 1, 8, 8));
        assert_eq!(b.clean.shape(), b.noisy.shape());
        assert_eq!(b.maps.len(), 6);
        for m in &b.maps {
            assert!(m.is_uniform());
            let s = m.get(0, 0) * 255.0;
            assert!((10.0 - 1e-9..=30.0 + 1e-9).contains(&s), "{s}");
        }
    }

    #[test]
    fn same_seed_same_batch() {
        let img = random_tensor(&mut rng(1), Shape4::new(1, 1, 20, 20));
        let a = sample_batch(std::slice::from_ref(&img), &opts(), &mut rng(9)).unwrap();
        let b = sample_batch(std::slice::from_ref(&img), &opts(), &mut rng(9)).unwrap();
        assert_eq!(a.noisy, b.noisy);
        assert_eq!(a.clean, b.clean);
    }

    #[test]
    fn small_or_mixed_images_rejected() {
        let small = Tensor4::zeros(Shape4::new(1, 1, 4, 4));
        assert!(sample_batch(&[small], &opts(), &mut rng(0)).is_err());
        let g = Tensor4::zeros(Shape4::new(1, 1, 16, 16));
        let c = Tensor4::zeros(Shape4::new(1, 3, 16, 16));
        assert!(sample_batch(&[g, c], &opts(), &mut rng(0)).is_err());
        assert!(sample_batch(&[], &opts(), &mut rng(0)).is_err());
    }
}
