//! Spatially variant noise: denoising with the true per-pixel map versus a
//! uniform map at its mean level.
//!
//! cargo run -p ffdnet --example spatially_variant -- [model]

use ffdnet::data::load_image;
use ffdnet::eval::{variant_noise_report, EvalSettings};
use ffdnet::model::load_model;
use ffdnet::noise::{gradient_map, RampAxis};

fn main() -> ffdnet::Result<()> {
    let root = env!("CARGO_MANIFEST_DIR");
    let model = std::env::args().nth(1).unwrap_or_else(|| format!("{root}/assets/toy_gray.model"));
    let params = load_model(model)?;
    let clean = load_image(format!("{root}/assets/images/coffee.png"))?;
    let (h, w) = (clean.shape().height, clean.shape().width);
    let map = gradient_map(h, w, 5.0, 50.0, RampAxis::Horizontal)?;
    let r = variant_noise_report(&params, &clean, &map, &EvalSettings { seed: 11, ..Default::default() })?;
    println!("noisy input          {:>6.2} dB", r.noisy);
    println!("matched map          {:>6.2} dB", r.matched);
    println!("uniform sigma {:>5.1}  {:>6.2} dB", r.mean_sigma, r.uniform_mean);
    println!("gain                 {:>6.2} dB", r.gain());
    Ok(())
}
