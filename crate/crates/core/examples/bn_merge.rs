//! Folds batch normalization into the convolutions and checks the outputs agree.
//!
//! cargo run -p ffdnet --example bn_merge

use ffdnet::init::default_init;
use ffdnet::layers::Mode;
use ffdnet::model::{forward, merge_batchnorm, ModelConfig};
use ffdnet::noise::uniform_map;
use ffdnet::{Shape4, Tensor4};

fn main() -> ffdnet::Result<()> {
    let mut params = default_init(&ModelConfig::new(6, 16, 1), 3)?;
    // Give the batch norms non-trivial statistics, as after training.
    for (i, layer) in params.layers.iter_mut().enumerate() {
        if let Some(bn) = &mut layer.bn {
            for c in 0..bn.channels() {
                let t = (i * 31 + c) as f64;
                bn.gamma[c] = 0.5 + (t * 0.37).sin().abs();
                bn.beta[c] = 0.1 * (t * 0.11).cos();
                bn.running_mean[c] = 0.2 * (t * 0.23).sin();
                bn.running_var[c] = 0.5 + (t * 0.07).cos().abs();
            }
        }
    }
    let merged = merge_batchnorm(&params)?;
    let image = Tensor4::from_fn(Shape4::new(1, 1, 64, 64), |_, _, y, x| {
        0.5 + 0.4 * ((y as f64) * 0.3).sin() * ((x as f64) * 0.2).cos()
    });
    let maps = [uniform_map(64, 64, 30.0)?];
    let a = forward(&params, &image, &maps, Mode::Infer)?;
    let b = forward(&merged, &image, &maps, Mode::Infer)?;
    println!(
        "parameters {} -> {}, max |difference| {:.2e}",
        params.num_parameters(),
        merged.num_parameters(),
        a.max_abs_diff(&b)?
    );
    Ok(())
}
