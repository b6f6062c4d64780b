mod common;

use std::time::Instant;

use common::*;
use ffdnet::init::default_init;
use ffdnet::layers::{
    batchnorm_forward, conv2d_backward, conv2d_forward, relu_forward, ConvLayer, Mode,
};
use ffdnet::model::{
    denoise, forward, map_channel, merge_batchnorm, pad_to_even, receptive_field, ModelConfig,
};
use ffdnet::noise::uniform_map;
use ffdnet::pixelshuffle::space_to_depth;
use ffdnet::{Shape4, Tensor4};
use proptest::prelude::*;
use rand::Rng;

fn conv_without_bias(seed: u64, cin: usize, cout: usize) -> ConvLayer {
    let mut r = rng(seed);
    ConvLayer::new(uniform(&mut r, Shape4::new(cout, cin, 3, 3), -1.0, 1.0), vec![0.0; cout]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn conv_is_linear_without_bias(
        seed in any::<u64>(),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        n in 1usize..3, cin in 1usize..4, cout in 1usize..4, h in 1usize..7, w in 1usize..7,
    ) {
        let layer = conv_without_bias(seed, cin, cout);
        let mut r = rng(seed ^ 0x5eed);
        let shape = Shape4::new(n, cin, h, w);
        let x = uniform(&mut r, shape, -1.0, 1.0);
        let z = uniform(&mut r, shape, -1.0, 1.0);
        let mix = x.zip_map(&z, |p, q| a * p + b * q).unwrap();
        let lhs = conv2d_forward(&mix, &layer).unwrap();
        let fx = conv2d_forward(&x, &layer).unwrap();
        let fz = conv2d_forward(&z, &layer).unwrap();
        let rhs = fx.zip_map(&fz, |p, q| a * p + b * q).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-10);
    }

    #[test]
    fn conv_input_gradient_is_the_adjoint(
        seed in any::<u64>(),
        n in 1usize..3, cin in 1usize..4, cout in 1usize..4, h in 1usize..7, w in 1usize..7,
    ) {
        let layer = conv_without_bias(seed, cin, cout);
        let mut r = rng(seed ^ 0xad);
        let x = uniform(&mut r, Shape4::new(n, cin, h, w), -1.0, 1.0);
        let y = uniform(&mut r, Shape4::new(n, cout, h, w), -1.0, 1.0);
        let lhs = conv2d_forward(&x, &layer).unwrap().dot(&y).unwrap();
        let rhs = x.dot(&conv2d_backward(&x, &layer, &y).unwrap().input).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-10 * (1.0 + lhs.abs()));
    }
}

#[test]
fn merged_network_matches_unmerged_on_100_nets() {
    for seed in 0..100 {
        let d = bn_fold_case(seed);
        assert!(d < 1e-5, "seed {seed}: {d:e}");
    }
}

#[test]
fn one_pixel_changes_stay_inside_the_receptive_field() {
    let config = ModelConfig::new(4, 6, 1);
    let (params, _, _) = {
        let mut p = default_init(&config, 3).unwrap();
        let mut r = rng(3);
        for layer in &mut p.layers {
            for b in &mut layer.conv.bias {
                *b = r.gen_range(-0.1..0.1);
            }
        }
        (p, (), ())
    };
    let f = config.downsample_factor;
    let radius = config.num_layers; // one 3x3 layer widens the support by 1 sub-pixel
    let size = 40;
    let mut r = rng(4);
    let image = uniform(&mut r, Shape4::new(1, 1, size, size), 0.0, 1.0);
    let maps = [uniform_map(size, size, 25.0).unwrap()];
    let base = forward(&params, &image, &maps, Mode::Infer).unwrap();
    for &(py, px) in &[(0usize, 0usize), (17, 22), (39, 1), (20, 39)] {
        let mut bumped = image.clone();
        bumped.set(0, 0, py, px, image.get(0, 0, py, px) + 0.5);
        let out = forward(&params, &bumped, &maps, Mode::Infer).unwrap();
        let (sy, sx) = ((py / f) as isize, (px / f) as isize);
        let mut changed = 0;
        for y in 0..size {
            for x in 0..size {
                if out.get(0, 0, y, x) != base.get(0, 0, y, x) {
                    changed += 1;
                    let (oy, ox) = ((y / f) as isize, (x / f) as isize);
                    assert!(
                        (oy - sy).abs() <= radius as isize && (ox - sx).abs() <= radius as isize,
                        "pixel ({py},{px}) changed output ({y},{x})"
                    );
                }
            }
        }
        assert!(changed > 0);
    }
    // The support box spans exactly the analytic receptive field.
    assert_eq!(f * (2 * radius + 1), receptive_field(config.num_layers, f));
}

#[test]
fn activation_variance_stays_bounded_at_init() {
    // Train-mode pass through the 15-layer grayscale preset, layer by layer.
    let config = ModelConfig::grayscale();
    let params = default_init(&config, 9).unwrap();
    let mut r = rng(10);
    let shape = Shape4::new(4, 1, 32, 32);
    let image = Tensor4::from_fn(shape, |_, _, _, _| r.sample::<f64, _>(rand_distr::StandardNormal));
    let input_var = variance(&image);
    let maps = [uniform_map(32, 32, 25.0).unwrap()];
    let mut x = space_to_depth(&image, 2).unwrap();
    x = x.concat_channels(&map_channel(&maps, shape, 2).unwrap()).unwrap();
    for (i, layer) in params.layers.iter().enumerate() {
        x = conv2d_forward(&x, &layer.conv).unwrap();
        if let Some(bn) = &layer.bn {
            x = batchnorm_forward(&x, bn, Mode::Train).unwrap().0;
        }
        let ratio = variance(&x) / input_var;
        assert!((0.1..=10.0).contains(&ratio), "layer {i}: variance ratio {ratio}");
        if layer.relu {
            x = relu_forward(&x);
        }
    }
}

fn variance(t: &Tensor4) -> f64 {
    let n = t.data().len() as f64;
    let mean = t.sum() / n;
    t.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

#[test]
fn padding_agrees_with_even_image_on_the_interior() {
    let config = ModelConfig::new(3, 5, 1);
    let params = default_init(&config, 21).unwrap();
    let mut r = rng(22);
    let odd = uniform(&mut r, Shape4::new(1, 1, 21, 19), 0.0, 1.0);
    // An even image sharing the odd image's pixels but with unrelated padding.
    let even = Tensor4::from_fn(Shape4::new(1, 1, 22, 20), |_, _, y, x| {
        if y < 21 && x < 19 {
            odd.get(0, 0, y, x)
        } else {
            r.gen_range(0.0..1.0)
        }
    });
    let a = denoise(&params, &odd, &uniform_map(21, 19, 30.0).unwrap()).unwrap();
    let b = denoise(&params, &even, &uniform_map(22, 20, 30.0).unwrap()).unwrap();
    assert_eq!(a.shape(), odd.shape());
    let rf = receptive_field(config.num_layers, config.downsample_factor);
    for y in 0..21 - rf {
        for x in 0..19 - rf {
            assert_eq!(a.get(0, 0, y, x), b.get(0, 0, y, x), "({y},{x})");
        }
    }
    let (_, crop) = pad_to_even(&odd);
    assert_eq!(crop.crop(&pad_to_even(&odd).0).unwrap(), odd);
}

#[test]
fn merging_is_not_slower() {
    // Soft check: batch norm is a per-element affine map next to a 3x3
    // convolution over 64 channels, so the gain from folding it is small.
    let params = default_init(&ModelConfig::grayscale(), 1).unwrap();
    let merged = merge_batchnorm(&params).unwrap();
    let mut r = rng(2);
    let image = uniform(&mut r, Shape4::new(1, 1, 256, 256), 0.0, 1.0);
    let maps = [uniform_map(256, 256, 25.0).unwrap()];
    let time = |p| {
        let t = Instant::now();
        forward(p, &image, &maps, Mode::Infer).unwrap();
        t.elapsed().as_secs_f64()
    };
    time(&params);
    let (mut unmerged_t, mut merged_t) = (f64::MAX, f64::MAX);
    for _ in 0..3 {
        unmerged_t = unmerged_t.min(time(&params));
        merged_t = merged_t.min(time(&merged));
    }
    let speedup = unmerged_t / merged_t;
    eprintln!("merged speedup on 256x256: {speedup:.3}x");
    assert!(speedup > 0.8, "merged forward is markedly slower: {speedup:.3}x");
}
