//! PSNR and the noise-level experiments built on it.

use std::fmt::Write as _;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::quantize_tensor;
use crate::error::{ensure, Result};
use crate::model::{denoise, ParameterSet};
use crate::noise::{add_awgn_with_rng, uniform_map, NoiseLevelMap};
use crate::tensor::Tensor4;

/// Peak signal-to-noise ratio in dB for images in `[0, 1]`. Identical images
/// give `f64::INFINITY`.
pub fn psnr(reference: &Tensor4, test: &Tensor4) -> Result<f64> {
    ensure!(
        reference.shape() == test.shape(),
        "PSNR needs equal shapes, got {} and {}",
        reference.shape(),
        test.shape()
    );
    ensure!(!reference.data().is_empty(), "PSNR of an empty image");
    let sse: f64 = reference
        .data()
        .iter()
        .zip(test.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let mse = sse / reference.data().len() as f64;
    Ok(if mse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    })
}

/// PSNR after quantizing `test` to 8 bits, as when the result is saved.
pub fn psnr_quantized(reference: &Tensor4, test: &Tensor4) -> Result<f64> {
    psnr(reference, &quantize_tensor(test))
}

/// Two decimals, or `inf` for identical images.
pub fn format_db(db: f64) -> String {
    if db.is_infinite() && db > 0.0 {
        "inf".to_string()
    } else {
        format!("{db:.2}")
    }
}

/// Noise synthesis and scoring settings shared by the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalSettings {
    pub seed: u64,
    /// Clip and quantize the noisy input.
    pub clipped: bool,
    /// Score the 8-bit quantized output.
    pub quantize_output: bool,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            seed: 0,
            clipped: false,
            quantize_output: false,
        }
    }
}

fn score(clean: &Tensor4, estimate: &Tensor4, settings: &EvalSettings) -> Result<f64> {
    if settings.quantize_output {
        psnr_quantized(clean, estimate)
    } else {
        psnr(clean, estimate)
    }
}

fn corrupt(clean: &Tensor4, map: &NoiseLevelMap, settings: &EvalSettings) -> Result<Tensor4> {
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    add_awgn_with_rng(clean, map, settings.clipped, &mut rng)
}

fn single_image(clean: &Tensor4) -> Result<(usize, usize)> {
    let s = clean.shape();
    ensure!(s.batch == 1, "evaluation expects one image, got a batch of {}", s.batch);
    Ok((s.height, s.width))
}

/// One row of a sweep: the swept noise level and the resulting PSNR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub sigma: f64,
    pub psnr: f64,
}

/// Corrupts `clean` once at `true_sigma`, then denoises the same noisy image
/// with each uniform `input_sigmas` level.
pub fn sensitivity_sweep(
    params: &ParameterSet,
    clean: &Tensor4,
    true_sigma: f64,
    input_sigmas: &[f64],
    settings: &EvalSettings,
) -> Result<Vec<SweepPoint>> {
    let (h, w) = single_image(clean)?;
    let noisy = corrupt(clean, &uniform_map(h, w, true_sigma)?, settings)?;
    input_sigmas
        .iter()
        .map(|&sigma| {
            let out = denoise(params, &noisy, &uniform_map(h, w, sigma)?)?;
            Ok(SweepPoint {
                sigma,
                psnr: score(clean, &out, settings)?,
            })
        })
        .collect()
}

/// Corrupts `clean` at each true level and denoises it with a fixed `input_sigma`.
/// Every level reuses the same Gaussian draw, scaled.
pub fn true_sigma_sweep(
    params: &ParameterSet,
    clean: &Tensor4,
    input_sigma: f64,
    true_sigmas: &[f64],
    settings: &EvalSettings,
) -> Result<Vec<SweepPoint>> {
    let (h, w) = single_image(clean)?;
    let input_map = uniform_map(h, w, input_sigma)?;
    true_sigmas
        .iter()
        .map(|&sigma| {
            let noisy = corrupt(clean, &uniform_map(h, w, sigma)?, settings)?;
            let out = denoise(params, &noisy, &input_map)?;
            Ok(SweepPoint {
                sigma,
                psnr: score(clean, &out, settings)?,
            })
        })
        .collect()
}

/// `sigma,psnr` CSV with a header naming the swept quantity.
pub fn sweep_csv(points: &[SweepPoint], column: &str) -> String {
    let mut out = format!("{column},psnr\n");
    for p in points {
        let _ = writeln!(out, "{},{}", p.sigma, format_db(p.psnr));
    }
    out
}

/// Fixed-width table for terminal output.
pub fn sweep_table(points: &[SweepPoint], column: &str) -> String {
    let mut out = format!("{column:>12}  {:>9}\n", "PSNR (dB)");
    for p in points {
        let _ = writeln!(out, "{:>12.2}  {:>9}", p.sigma, format_db(p.psnr));
    }
    out
}

/// Outcome of denoising spatially variant noise with two kinds of map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariantReport {
    /// PSNR with the true per-pixel map.
    pub matched: f64,
    /// PSNR with a uniform map at the true map's mean level.
    pub uniform_mean: f64,
    pub mean_sigma: f64,
    pub noisy: f64,
}

impl VariantReport {
    pub fn gain(&self) -> f64 {
        self.matched - self.uniform_mean
    }
}

/// Corrupts `clean` with `true_map` and compares the matched map against its mean.
pub fn variant_noise_report(
    params: &ParameterSet,
    clean: &Tensor4,
    true_map: &NoiseLevelMap,
    settings: &EvalSettings,
) -> Result<VariantReport> {
    let (h, w) = single_image(clean)?;
    let noisy = corrupt(clean, true_map, settings)?;
    let mean_sigma = true_map.mean() * 255.0;
    let matched = denoise(params, &noisy, true_map)?;
    let flat = denoise(params, &noisy, &uniform_map(h, w, mean_sigma)?)?;
    Ok(VariantReport {
        matched: score(clean, &matched, settings)?,
        uniform_mean: score(clean, &flat, settings)?,
        mean_sigma,
        noisy: psnr(clean, &noisy)?,
    })
}
