//! Trains the small grayscale model bundled as `assets/toy_gray.model`.
//!
//! cargo run --release -p ffdnet --example train_toy -- [out_path]
//!
//! Three layers of 16 channels on 32x32 patches of the four bundled training
//! images (the held-out image is never seen), noise levels in [0, 50]. Takes
//! about 25 minutes on one core; the result is bitwise reproducible.

use std::path::PathBuf;

use ffdnet::data::load_image;
use ffdnet::model::{save_model, ModelConfig, Precision};
use ffdnet::optim::{train_on_images, SampleOptions, TrainPlan};

fn main() -> ffdnet::Result<()> {
    let root = env!("CARGO_MANIFEST_DIR");
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| format!("{root}/assets/toy_gray.model")));
    let images = ["camera", "astronaut", "brick", "gravel"]
        .iter()
        .map(|n| load_image(format!("{root}/assets/images/{n}.png")))
        .collect::<ffdnet::Result<Vec<_>>>()?;

    let plan = TrainPlan {
        batch_size: 32,
        patches_per_epoch: 32 * 200,
        max_stage1_epochs: 60,
        max_epochs: 80,
        finetune_epochs: 5,
        sigma_range: (0.0, 50.0),
        ..TrainPlan::default()
    };
    let opts = SampleOptions::new(&plan, 32, true, false);
    let trained = train_on_images(&plan, &images, &opts, &ModelConfig::new(3, 16, 1), 7, |r| println!("{r}"))?;
    save_model(&out, &trained.params, Precision::F64)?;
    println!("saved {}", out.display());
    Ok(())
}
