//! Compares backpropagated gradients of a small network against central differences.
//!
//! cargo run -p ffdnet --example gradient_check

use ffdnet::init::default_init;
use ffdnet::layers::Mode;
use ffdnet::model::{backward, forward, ModelConfig, ParameterSet};
use ffdnet::noise::uniform_map;
use ffdnet::{Shape4, Tensor4};

const H: f64 = 1e-5;

fn loss(p: &ParameterSet, noisy: &Tensor4, target: &Tensor4, maps: &[ffdnet::noise::NoiseLevelMap]) -> f64 {
    let out = forward(p, noisy, maps, Mode::Train).unwrap();
    let n = noisy.shape().batch as f64;
    out.data().iter().zip(target.data()).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / (2.0 * n)
}

fn main() -> ffdnet::Result<()> {
    let params = default_init(&ModelConfig::new(3, 4, 1), 5)?;
    let shape = Shape4::new(2, 1, 8, 8);
    let noisy = Tensor4::from_fn(shape, |n, _, y, x| ((n * 64 + y * 8 + x) as f64 * 0.61).sin() * 0.5 + 0.5);
    let target = Tensor4::from_fn(shape, |n, _, y, x| ((n * 64 + y * 8 + x) as f64 * 0.17).cos() * 0.5 + 0.5);
    let maps = [uniform_map(8, 8, 20.0)?, uniform_map(8, 8, 45.0)?];

    let out = backward(&params, &noisy, &maps, &target)?;
    let names = params.block_names();
    let scale = out.grads.max_abs().max(1.0);
    for (b, analytic) in out.grads.blocks().iter().enumerate() {
        let mut worst: f64 = 0.0;
        for i in 0..analytic.len() {
            let mut plus = params.clone();
            plus.trainable_blocks_mut()[b][i] += H;
            let mut minus = params.clone();
            minus.trainable_blocks_mut()[b][i] -= H;
            let numeric = (loss(&plus, &noisy, &target, &maps) - loss(&minus, &noisy, &target, &maps)) / (2.0 * H);
            let denom = analytic[i].abs().max(numeric.abs()).max(1e-6 * scale);
            worst = worst.max((analytic[i] - numeric).abs() / denom);
        }
        println!("{:>18}: max relative error {worst:.2e}", names[b]);
    }
    Ok(())
}
