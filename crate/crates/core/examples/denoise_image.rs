//! Denoises an image with a trained model and a uniform noise level.
//!
//! cargo run -p ffdnet --example denoise_image -- <model> <noisy image> <sigma> <output>
//!
//! With no arguments, corrupts a bundled image at sigma 25 and denoises it
//! with the bundled toy model.

use ffdnet::data::{load_image, save_image};
use ffdnet::eval::psnr;
use ffdnet::model::{denoise, load_model};
use ffdnet::noise::{add_awgn, uniform_map, NoiseSpec};

fn main() -> ffdnet::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let root = env!("CARGO_MANIFEST_DIR");
    if let [model, input, sigma, output] = args.as_slice() {
        let sigma: f64 = sigma.parse().expect("sigma must be a number");
        let params = load_model(model)?;
        let noisy = load_image(input)?;
        let s = noisy.shape();
        let out = denoise(&params, &noisy, &uniform_map(s.height, s.width, sigma)?)?;
        save_image(output, &out)?;
        println!("wrote {output}");
        return Ok(());
    }

    let params = load_model(format!("{root}/assets/toy_gray.model"))?;
    let clean = load_image(format!("{root}/assets/images/coffee.png"))?;
    let s = clean.shape();
    let map = uniform_map(s.height, s.width, 25.0)?;
    let noisy = add_awgn(&clean, &NoiseSpec { map: map.clone(), clipped: false, seed: 0 })?;
    let out = denoise(&params, &noisy, &map)?;
    save_image("denoised.png", &out)?;
    println!("noisy {:.2} dB, denoised {:.2} dB -> denoised.png", psnr(&clean, &noisy)?, psnr(&clean, &out)?);
    Ok(())
}
