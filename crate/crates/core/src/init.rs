//! Orthogonal filter initialization.
//!
//! Each filter bank `(out, in, k, k)` is viewed as an `out x (in*k*k)` matrix
//! whose rows are the flattened filters. Its rows (when `out <= in*k*k`) or
//! columns (otherwise) are made orthonormal by a Householder QR factorization
//! of a standard Gaussian matrix, with the columns of Q multiplied by the signs
//! of R's diagonal so the result is uniformly distributed over the orthogonal
//! group.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{ensure, Result};
use crate::model::{ModelConfig, ParameterSet};
use crate::tensor::{Shape4, Tensor4};

/// Gain applied to every layer by [`default_init`].
pub const DEFAULT_GAIN: f64 = 1.0;

/// Row-major dense matrix used only during initialization.
struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    fn at_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}

/// Thin Q factor (`rows x cols`, `rows >= cols`) of `a`, sign-corrected so
/// that the matching R has a positive diagonal.
fn orthonormal_columns(mut a: Matrix) -> Matrix {
    let (m, n) = (a.rows, a.cols);
    debug_assert!(m >= n);
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut diag_sign = vec![1.0; n];

    for k in 0..n {
        let norm = (k..m).map(|r| a.at(r, k).powi(2)).sum::<f64>().sqrt();
        let x0 = a.at(k, k);
        let alpha = if x0 >= 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..m).map(|r| a.at(r, k)).collect();
        v[0] -= alpha;
        let vnorm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if vnorm > 0.0 {
            v.iter_mut().for_each(|x| *x /= vnorm);
            for c in k..n {
                let proj: f64 = (k..m).map(|r| v[r - k] * a.at(r, c)).sum();
                for r in k..m {
                    *a.at_mut(r, c) -= 2.0 * v[r - k] * proj;
                }
            }
        }
        diag_sign[k] = if a.at(k, k) < 0.0 { -1.0 } else { 1.0 };
        reflectors.push(if vnorm > 0.0 { v } else { Vec::new() });
    }

    // Q = H_0 H_1 ... H_{n-1} applied to the first n columns of the identity.
    let mut q = Matrix {
        rows: m,
        cols: n,
        data: vec![0.0; m * n],
    };
    for j in 0..n {
        *q.at_mut(j, j) = 1.0;
    }
    for k in (0..n).rev() {
        let v = &reflectors[k];
        if v.is_empty() {
            continue;
        }
        for c in 0..n {
            let proj: f64 = (k..m).map(|r| v[r - k] * q.at(r, c)).sum();
            for r in k..m {
                *q.at_mut(r, c) -= 2.0 * v[r - k] * proj;
            }
        }
    }
    for r in 0..m {
        for (c, s) in diag_sign.iter().enumerate() {
            *q.at_mut(r, c) *= s;
        }
    }
    q
}

fn gaussian(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    Matrix {
        rows,
        cols,
        data: (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect(),
    }
}

/// Orthogonally initialized filter bank of the given `(out, in, k, k)` shape.
pub fn orthogonal_init(shape: Shape4, gain: f64, rng: &mut impl Rng) -> Result<Tensor4> {
    let rows = shape.batch;
    let cols = shape.channels * shape.height * shape.width;
    ensure!(
        rows >= 1 && cols >= 1,
        "orthogonal init needs a non-empty filter bank, got {shape}"
    );
    ensure!(gain.is_finite(), "gain must be finite");
    let data: Vec<f64> = if rows <= cols {
        // Orthonormal rows: transpose of a tall matrix with orthonormal columns.
        let q = orthonormal_columns(gaussian(cols, rows, rng));
        let mut w = vec![0.0; rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                w[r * cols + c] = gain * q.at(c, r);
            }
        }
        w
    } else {
        let q = orthonormal_columns(gaussian(rows, cols, rng));
        q.data.into_iter().map(|v| gain * v).collect()
    };
    Tensor4::from_vec(shape, data)
}

/// Orthogonal filters (gain 1) in every layer, zero biases and identity batch norms.
pub fn default_init(config: &ModelConfig, seed: u64) -> Result<ParameterSet> {
    let mut params = ParameterSet::zeros(*config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for layer in &mut params.layers {
        layer.conv.weights = orthogonal_init(layer.conv.weights.shape(), DEFAULT_GAIN, &mut rng)?;
    }
    Ok(params)
}

/// Largest entry of `|W W^T - gain^2 I|` (or `|W^T W - gain^2 I|` for tall W).
pub fn orthogonality_residual(filters: &Tensor4, gain: f64) -> f64 {
    let s = filters.shape();
    let rows = s.batch;
    let cols = s.sample_len();
    let w = filters.data();
    let g2 = gain * gain;
    let mut worst: f64 = 0.0;
    if rows <= cols {
        for i in 0..rows {
            for j in 0..rows {
                let dot: f64 = (0..cols).map(|c| w[i * cols + c] * w[j * cols + c]).sum();
                let target = if i == j { g2 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
    } else {
        for i in 0..cols {
            for j in 0..cols {
                let dot: f64 = (0..rows).map(|r| w[r * cols + i] * w[r * cols + j]).sum();
                let target = if i == j { g2 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::rng;

    #[test]
    fn wide_bank_has_orthonormal_rows() {
        let w = orthogonal_init(Shape4::new(4, 1, 3, 3), 1.0, &mut rng(1)).unwrap();
        assert!(orthogonality_residual(&w, 1.0) < 1e-10);
    }

    #[test]
    fn tall_bank_has_orthonormal_columns() {
        let w = orthogonal_init(Shape4::new(64, 5, 3, 3), 1.0, &mut rng(2)).unwrap();
        assert!(orthogonality_residual(&w, 1.0) < 1e-10);
        let g = orthogonal_init(Shape4::new(30, 2, 3, 3), 0.5, &mut rng(2)).unwrap();
        assert!(orthogonality_residual(&g, 0.5) < 1e-10);
    }

    #[test]
    fn scalar_bank_has_magnitude_gain() {
        let w = orthogonal_init(Shape4::new(1, 1, 1, 1), 1.7, &mut rng(3)).unwrap();
        assert!((w.data()[0].abs() - 1.7).abs() < 1e-15);
    }

    #[test]
    fn seeds_control_the_draw() {
        let s = Shape4::new(8, 4, 3, 3);
        let a = orthogonal_init(s, 1.0, &mut rng(5)).unwrap();
        let b = orthogonal_init(s, 1.0, &mut rng(5)).unwrap();
        let c = orthogonal_init(s, 1.0, &mut rng(6)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn degenerate_shapes_are_rejected() {
        assert!(orthogonal_init(Shape4::new(0, 1, 3, 3), 1.0, &mut rng(0)).is_err());
        assert!(orthogonal_init(Shape4::new(2, 0, 3, 3), 1.0, &mut rng(0)).is_err());
    }

    #[test]
    fn default_init_layers_are_orthogonal() {
        let p = default_init(&ModelConfig::grayscale(), 42).unwrap();
        for layer in &p.layers {
            assert!(orthogonality_residual(&layer.conv.weights, 1.0) < 1e-10);
            assert!(layer.conv.bias.iter().all(|&b| b == 0.0));
            if let Some(bn) = &layer.bn {
                assert!(bn.gamma.iter().all(|&g| g == 1.0));
                assert!(bn.beta.iter().all(|&b| b == 0.0));
                assert!(bn.running_mean.iter().all(|&m| m == 0.0));
                assert!(bn.running_var.iter().all(|&v| v == 1.0));
            }
        }
        assert_eq!(default_init(&ModelConfig::grayscale(), 42).unwrap(), p);
    }

    #[test]
    fn row_norms_spread_like_haar() {
        // Sign correction: the first entries of Q should not all share a sign.
        let mut positives = 0;
        for seed in 0..200 {
            let w = orthogonal_init(Shape4::new(1, 1, 2, 2), 1.0, &mut rng(seed)).unwrap();
            if w.data()[0] > 0.0 {
                positives += 1;
            }
        }
        assert!((60..=140).contains(&positives), "{positives}");
    }
}
