//! Corrupts a bundled image with uniform, ramp and clipped noise and saves the results.
//!
//! cargo run -p ffdnet --example noise_synthesis -- [out_dir]

use std::path::PathBuf;

use ffdnet::data::{load_image, save_image};
use ffdnet::eval::psnr;
use ffdnet::noise::{add_awgn, gradient_map, uniform_map, NoiseSpec, RampAxis};

fn main() -> ffdnet::Result<()> {
    let out_dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "noise_out".into()));
    std::fs::create_dir_all(&out_dir)?;
    let clean = load_image(concat!(env!("CARGO_MANIFEST_DIR"), "/assets/images/camera.png"))?;
    let (h, w) = (clean.shape().height, clean.shape().width);

    let cases = [
        ("uniform25", uniform_map(h, w, 25.0)?, false),
        ("ramp5_50", gradient_map(h, w, 5.0, 50.0, RampAxis::Horizontal)?, false),
        ("clipped50", uniform_map(h, w, 50.0)?, true),
    ];
    for (name, map, clipped) in cases {
        let noisy = add_awgn(&clean, &NoiseSpec { map, clipped, seed: 1 })?;
        let path = out_dir.join(format!("{name}.png"));
        save_image(&path, &noisy)?;
        println!("{name:>10}: {:.2} dB -> {}", psnr(&clean, &noisy)?, path.display());
    }
    Ok(())
}
