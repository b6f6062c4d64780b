//! The interactive workflow: place a few anchors with noise levels, preview
//! the interpolated map, denoise, and step one anchor's level by 5.
//!
//! cargo run -p ffdnet --example interactive_anchors -- [model] [image] [out_dir]

use std::path::PathBuf;

use ffdnet::data::{load_image, save_image};
use ffdnet::model::{denoise, load_model};
use ffdnet::noise::file::map_to_preview;
use ffdnet::noise::{add_awgn, anchored_map, gradient_map, NoiseSpec, RampAxis, RegionAnchor};

fn main() -> ffdnet::Result<()> {
    let mut args = std::env::args().skip(1);
    let root = env!("CARGO_MANIFEST_DIR");
    let model = args.next().unwrap_or_else(|| format!("{root}/assets/toy_gray.model"));
    let image = args.next().unwrap_or_else(|| format!("{root}/assets/images/coffee.png"));
    let out_dir = PathBuf::from(args.next().unwrap_or_else(|| "anchors_out".into()));
    std::fs::create_dir_all(&out_dir)?;

    let params = load_model(&model)?;
    let clean = load_image(&image)?;
    let (h, w) = (clean.shape().height, clean.shape().width);
    // Stand-in for a real photo: noise that grows from left to right.
    let noisy = add_awgn(
        &clean,
        &NoiseSpec { map: gradient_map(h, w, 10.0, 45.0, RampAxis::Horizontal)?, clipped: false, seed: 2 },
    )?;
    save_image(out_dir.join("noisy.png"), &noisy)?;

    for (step, right_sigma) in [30.0, 35.0, 40.0, 45.0].into_iter().enumerate() {
        let anchors = [
            RegionAnchor { row: h / 2, col: 0, sigma: 10.0 },
            RegionAnchor { row: h / 2, col: w - 1, sigma: right_sigma },
        ];
        let map = anchored_map(h, w, &anchors)?;
        let out = denoise(&params, &noisy, &map)?;
        save_image(out_dir.join(format!("attempt{step}_map.png")), &map_to_preview(&map))?;
        save_image(out_dir.join(format!("attempt{step}.png")), &out)?;
        let psnr = ffdnet::eval::psnr(&clean, &out)?;
        println!("attempt {step}: right anchor sigma {right_sigma:>4} -> {psnr:.2} dB");
    }
    Ok(())
}
