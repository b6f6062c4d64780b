//! Noise level sensitivity: fixed true level with swept input levels, and the reverse.
//!
//! cargo run -p ffdnet --example sensitivity_sweep -- [model]

use ffdnet::data::load_image;
use ffdnet::eval::{sensitivity_sweep, sweep_csv, sweep_table, true_sigma_sweep, EvalSettings};
use ffdnet::model::load_model;

fn main() -> ffdnet::Result<()> {
    let root = env!("CARGO_MANIFEST_DIR");
    let model = std::env::args().nth(1).unwrap_or_else(|| format!("{root}/assets/toy_gray.model"));
    let params = load_model(model)?;
    let clean = load_image(format!("{root}/assets/images/coffee.png"))?;
    let settings = EvalSettings { seed: 13, ..Default::default() };

    let inputs = [5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 40.0, 50.0];
    let by_input = sensitivity_sweep(&params, &clean, 25.0, &inputs, &settings)?;
    println!("true sigma 25:\n{}", sweep_table(&by_input, "input_sigma"));
    print!("{}", sweep_csv(&by_input, "input_sigma"));

    let truths = [5.0, 15.0, 25.0, 35.0, 50.0];
    let by_truth = true_sigma_sweep(&params, &clean, 25.0, &truths, &settings)?;
    println!("\ninput sigma 25:\n{}", sweep_table(&by_truth, "true_sigma"));
    Ok(())
}
