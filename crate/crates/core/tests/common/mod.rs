//! Finite-difference oracles shared by the integration and acceptance tests.
//! Everything here is written against the public API only.
#![allow(dead_code)]

use ffdnet::layers::{
    batchnorm_backward, batchnorm_forward, conv2d_backward, conv2d_forward, relu_backward,
    relu_forward, BatchNormLayer, ConvLayer, Mode,
};
use ffdnet::model::{backward, forward, ModelConfig, ParameterSet};
use ffdnet::noise::{uniform_map, NoiseLevelMap};
use ffdnet::pixelshuffle::{depth_to_space, space_to_depth};
use ffdnet::{Shape4, Tensor4};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Central-difference step.
pub const H: f64 = 1e-5;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(r: &mut ChaCha8Rng, shape: Shape4, lo: f64, hi: f64) -> Tensor4 {
    Tensor4::from_fn(shape, |_, _, _, _| r.gen_range(lo..hi))
}

/// Values in `[-1, -0.05] U [0.05, 1]`, so a step of `H` never crosses the ReLU kink.
pub fn away_from_zero(r: &mut ChaCha8Rng, shape: Shape4) -> Tensor4 {
    Tensor4::from_fn(shape, |_, _, _, _| {
        let m = r.gen_range(0.05..1.0);
        if r.gen_bool(0.5) {
            m
        } else {
            -m
        }
    })
}

/// `|a - n| / max(|a|, |n|, floor)`, maximized over entries.
pub fn max_rel_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Central differences of `loss` with respect to `len` scalars selected by `slot`.
pub fn numeric_grad<T: Clone>(
    base: &T,
    len: usize,
    slot: impl for<'a> Fn(&'a mut T, usize) -> &'a mut f64,
    loss: impl Fn(&T) -> f64,
) -> Vec<f64> {
    (0..len)
        .map(|i| {
            let mut plus = base.clone();
            *slot(&mut plus, i) += H;
            let mut minus = base.clone();
            *slot(&mut minus, i) -= H;
            (loss(&plus) - loss(&minus)) / (2.0 * H)
        })
        .collect()
}

/// Scalar probe `<r, y>` turning a tensor-valued op into a loss whose output
/// gradient is exactly `r`.
fn probe(r: &Tensor4, y: &Tensor4) -> f64 {
    r.data().iter().zip(y.data()).map(|(a, b)| a * b).sum()
}

const FLOOR: f64 = 1e-6;

/// Worst relative error over input, weight and bias gradients of one random convolution.
pub fn conv_check(seed: u64) -> f64 {
    let mut r = rng(seed);
    let (n, cin, cout) = (r.gen_range(1..3), r.gen_range(1..4), r.gen_range(1..4));
    let (h, w) = (r.gen_range(1..6), r.gen_range(1..6));
    let x = uniform(&mut r, Shape4::new(n, cin, h, w), -1.0, 1.0);
    let layer = ConvLayer::new(
        uniform(&mut r, Shape4::new(cout, cin, 3, 3), -1.0, 1.0),
        (0..cout).map(|_| r.gen_range(-1.0..1.0)).collect(),
    )
    .unwrap();
    let probe_t = uniform(&mut r, Shape4::new(n, cout, h, w), -1.0, 1.0);
    let g = conv2d_backward(&x, &layer, &probe_t).unwrap();

    let f_x = |x: &Tensor4| probe(&probe_t, &conv2d_forward(x, &layer).unwrap());
    let f_l = |l: &ConvLayer| probe(&probe_t, &conv2d_forward(&x, l).unwrap());
    let nx = numeric_grad(&x, x.data().len(), |t, i| &mut t.data_mut()[i], f_x);
    let nw = numeric_grad(&layer, layer.weights.data().len(), |l, i| &mut l.weights.data_mut()[i], f_l);
    let nb = numeric_grad(&layer, cout, |l, i| &mut l.bias[i], f_l);
    max_rel_error(g.input.data(), &nx, FLOOR)
        .max(max_rel_error(g.weights.data(), &nw, FLOOR))
        .max(max_rel_error(&g.bias, &nb, FLOOR))
}

pub fn relu_check(seed: u64) -> f64 {
    let mut r = rng(seed);
    let shape = Shape4::new(r.gen_range(1..3), r.gen_range(1..4), r.gen_range(1..6), r.gen_range(1..6));
    let x = away_from_zero(&mut r, shape);
    let probe_t = uniform(&mut r, shape, -1.0, 1.0);
    let g = relu_backward(&x, &probe_t).unwrap();
    let nx = numeric_grad(&x, x.data().len(), |t, i| &mut t.data_mut()[i], |x| {
        probe(&probe_t, &relu_forward(x))
    });
    max_rel_error(g.data(), &nx, FLOOR)
}

pub fn batchnorm_check(seed: u64, mode: Mode) -> f64 {
    let mut r = rng(seed);
    let c = r.gen_range(1..4);
    let shape = Shape4::new(r.gen_range(2..4), c, r.gen_range(1..5), r.gen_range(1..5));
    let x = uniform(&mut r, shape, -1.0, 1.0);
    let mut layer = BatchNormLayer::new(c);
    for i in 0..c {
        layer.gamma[i] = r.gen_range(0.5..1.5);
        layer.beta[i] = r.gen_range(-0.5..0.5);
        layer.running_mean[i] = r.gen_range(-0.5..0.5);
        layer.running_var[i] = r.gen_range(0.5..1.5);
    }
    let probe_t = uniform(&mut r, shape, -1.0, 1.0);
    let g = batchnorm_backward(&x, &layer, mode, &probe_t).unwrap();
    let out = |x: &Tensor4, l: &BatchNormLayer| batchnorm_forward(x, l, mode).unwrap().0;
    let nx = numeric_grad(&x, x.data().len(), |t, i| &mut t.data_mut()[i], |x| {
        probe(&probe_t, &out(x, &layer))
    });
    let f_l = |l: &BatchNormLayer| probe(&probe_t, &out(&x, l));
    let ng = numeric_grad(&layer, c, |l, i| &mut l.gamma[i], f_l);
    let nb = numeric_grad(&layer, c, |l, i| &mut l.beta[i], f_l);
    max_rel_error(g.input.data(), &nx, FLOOR)
        .max(max_rel_error(&g.gamma, &ng, FLOOR))
        .max(max_rel_error(&g.beta, &nb, FLOOR))
}

/// depth_to_space is a permutation, so its adjoint is space_to_depth.
pub fn pixelshuffle_check(seed: u64) -> f64 {
    let mut r = rng(seed);
    let f = r.gen_range(1..4);
    let shape = Shape4::new(r.gen_range(1..3), f * f * r.gen_range(1..3), r.gen_range(1..4), r.gen_range(1..4));
    let x = uniform(&mut r, shape, -1.0, 1.0);
    let out_shape = depth_to_space(&x, f).unwrap().shape();
    let probe_t = uniform(&mut r, out_shape, -1.0, 1.0);
    let analytic = space_to_depth(&probe_t, f).unwrap();
    let nx = numeric_grad(&x, x.data().len(), |t, i| &mut t.data_mut()[i], |x| {
        probe(&probe_t, &depth_to_space(x, f).unwrap())
    });
    max_rel_error(analytic.data(), &nx, FLOOR)
}

/// A network instance with random parameters, inputs, maps and targets.
pub struct NetCase {
    pub params: ParameterSet,
    pub noisy: Tensor4,
    pub maps: Vec<NoiseLevelMap>,
    pub target: Tensor4,
}

pub fn random_net(seed: u64, layers: usize, channels: usize, batch: usize, size: usize) -> NetCase {
    let mut r = rng(seed);
    let mut params = ffdnet::init::default_init(&ModelConfig::new(layers, channels, 1), seed).unwrap();
    for layer in &mut params.layers {
        for b in &mut layer.conv.bias {
            *b = r.gen_range(-0.1..0.1);
        }
        if let Some(bn) = &mut layer.bn {
            for i in 0..bn.channels() {
                bn.gamma[i] = r.gen_range(0.5..1.5);
                bn.beta[i] = r.gen_range(-0.2..0.2);
                bn.running_mean[i] = r.gen_range(-0.2..0.2);
                bn.running_var[i] = r.gen_range(0.5..1.5);
            }
        }
    }
    let shape = Shape4::new(batch, 1, size, size);
    let noisy = uniform(&mut r, shape, 0.0, 1.0);
    let target = uniform(&mut r, shape, 0.0, 1.0);
    let maps = (0..batch)
        .map(|_| uniform_map(size, size, r.gen_range(0.0..75.0)).unwrap())
        .collect();
    NetCase {
        params,
        noisy,
        maps,
        target,
    }
}

/// Training loss recomputed from a train-mode forward pass.
pub fn reference_loss(case: &NetCase, params: &ParameterSet) -> f64 {
    let out = forward(params, &case.noisy, &case.maps, Mode::Train).unwrap();
    let sse: f64 = out
        .data()
        .iter()
        .zip(case.target.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    sse / (2.0 * case.noisy.shape().batch as f64)
}

/// Worst relative error over every trainable parameter of the network.
///
/// The relative-error floor scales with the largest gradient: a convolution
/// bias feeding batch norm has an exactly zero gradient, and its finite
/// difference is pure rounding noise of order `eps * loss / H`.
pub fn network_check(case: &NetCase) -> f64 {
    let out = backward(&case.params, &case.noisy, &case.maps, &case.target).unwrap();
    let analytic = out.grads.blocks();
    let floor = FLOOR * out.grads.max_abs().max(1.0);
    let block_lens: Vec<usize> = analytic.iter().map(|b| b.len()).collect();
    let mut worst: f64 = 0.0;
    for (b, len) in block_lens.iter().enumerate() {
        let numeric = numeric_grad(
            &case.params,
            *len,
            |p, i| &mut p.trainable_blocks_mut().swap_remove(b)[i],
            |p| reference_loss(case, p),
        );
        worst = worst.max(max_rel_error(analytic[b], &numeric, floor));
    }
    worst
}

/// Random small network with non-trivial batch-norm statistics, for fold checks.
pub fn random_bn_net(seed: u64) -> (ParameterSet, Tensor4, NoiseLevelMap) {
    let mut r = rng(seed);
    let layers = r.gen_range(3..6);
    let channels = r.gen_range(2..9);
    let in_channels = if r.gen_bool(0.5) { 1 } else { 3 };
    let mut params =
        ffdnet::init::default_init(&ModelConfig::new(layers, channels, in_channels), seed).unwrap();
    for layer in &mut params.layers {
        for b in &mut layer.conv.bias {
            *b = r.gen_range(-0.3..0.3);
        }
        if let Some(bn) = &mut layer.bn {
            for i in 0..bn.channels() {
                bn.gamma[i] = r.gen_range(-2.0..2.0);
                bn.beta[i] = r.gen_range(-0.5..0.5);
                bn.running_mean[i] = r.gen_range(-1.0..1.0);
                bn.running_var[i] = r.gen_range(0.01..4.0);
            }
        }
    }
    let (h, w) = (2 * r.gen_range(2..9), 2 * r.gen_range(2..9));
    let batch = r.gen_range(1..3);
    let image = uniform(&mut r, Shape4::new(batch, in_channels, h, w), 0.0, 1.0);
    let map = uniform_map(h, w, r.gen_range(0.0..75.0)).unwrap();
    (params, image, map)
}

/// Max abs difference between unmerged and merged infer-mode outputs.
pub fn bn_fold_case(seed: u64) -> f64 {
    let (params, image, map) = random_bn_net(seed);
    let merged = ffdnet::model::merge_batchnorm(&params).unwrap();
    let maps = [map];
    let a = forward(&params, &image, &maps, Mode::Infer).unwrap();
    let b = forward(&merged, &image, &maps, Mode::Infer).unwrap();
    a.max_abs_diff(&b).unwrap()
}
