use crate::error::{ensure, Error, Result};
use crate::model::{ParamGrads, ParameterSet};

pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_EPSILON: f64 = 1e-8;

/// Adam moment estimates, one buffer per trainable parameter block.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub lr: f64,
}

impl AdamState {
    /// Fresh state with default hyper-parameters for blocks of the given lengths.
    pub fn with_block_lens(lens: &[usize], lr: f64) -> Self {
        Self {
            step: 0,
            m: lens.iter().map(|&n| vec![0.0; n]).collect(),
            v: lens.iter().map(|&n| vec![0.0; n]).collect(),
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
            epsilon: DEFAULT_EPSILON,
            lr,
        }
    }

    pub fn for_params(params: &ParameterSet, lr: f64) -> Self {
        let lens: Vec<usize> = params.trainable_blocks().iter().map(|b| b.len()).collect();
        Self::with_block_lens(&lens, lr)
    }

    /// One bias-corrected Adam update over raw blocks. Nothing is modified if
    /// any gradient is non-finite; the offending block index is returned.
    pub fn update(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> std::result::Result<(), usize> {
        assert_eq!(params.len(), self.m.len(), "parameter block count changed");
        assert_eq!(grads.len(), self.m.len(), "gradient block count changed");
        if let Some(bad) = grads.iter().position(|g| g.iter().any(|v| !v.is_finite())) {
            return Err(bad);
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (b, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            assert_eq!(p.len(), g.len(), "block {b} length mismatch");
            let (m, v) = (&mut self.m[b], &mut self.v[b]);
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= self.lr * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
        Ok(())
    }
}

/// Applies one Adam step to `params` in place.
pub fn adam_step(params: &mut ParameterSet, grads: &ParamGrads, state: &mut AdamState) -> Result<()> {
    let names = params.block_names();
    let grad_blocks = grads.blocks();
    let mut blocks = params.trainable_blocks_mut();
    ensure!(
        blocks.len() == grad_blocks.len() && blocks.len() == state.m.len(),
        "parameter, gradient and optimizer block counts differ ({}, {}, {})",
        blocks.len(),
        grad_blocks.len(),
        state.m.len()
    );
    for (i, (p, g)) in blocks.iter().zip(&grad_blocks).enumerate() {
        ensure!(
            p.len() == g.len() && p.len() == state.m[i].len(),
            "{} has {} values but its gradient has {}",
            names[i],
            p.len(),
            g.len()
        );
    }
    state
        .update(&mut blocks, &grad_blocks)
        .map_err(|bad| Error::Training {
            location: names[bad].clone(),
            message: "non-finite gradient".into(),
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::init::default_init;
    use crate::model::ModelConfig;

    #[test]
    fn first_step_on_scalar() {
        let mut theta = [0.0];
        let mut s = AdamState::with_block_lens(&[1], 0.1);
        s.update(&mut [&mut theta[..]], &[&[1.0]]).unwrap();
        // m_hat = 1, v_hat = 1: theta' = -0.1 / (1 + 1e-8).
        assert!((theta[0] + 0.1 / (1.0 + 1e-8)).abs() < 1e-16);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn zero_gradient_is_identity() {
        let mut p = default_init(&ModelConfig::new(3, 4, 1), 1).unwrap();
        let before = p.clone();
        let grads = ParamGrads {
            layers: p
                .layers
                .iter()
                .map(|l| crate::model::LayerGrads {
                    weights: crate::tensor::Tensor4::zeros(l.conv.weights.shape()),
                    bias: vec![0.0; l.conv.bias.len()],
                    bn: l.bn.as_ref().map(|bn| (vec![0.0; bn.channels()], vec![0.0; bn.channels()])),
                })
                .collect(),
        };
        let mut s = AdamState::for_params(&p, 1e-3);
        for _ in 0..3 {
            adam_step(&mut p, &grads, &mut s).unwrap();
        }
        assert_eq!(p, before);
        assert_eq!(s.step, 3);
    }

    #[test]
    fn nan_gradient_names_block_and_leaves_state() {
        let mut p = default_init(&ModelConfig::new(3, 4, 1), 1).unwrap();
        let mut grads = ParamGrads {
            layers: p
                .layers
                .iter()
                .map(|l| crate::model::LayerGrads {
                    weights: crate::tensor::Tensor4::filled(l.conv.weights.shape(), 0.1),
                    bias: vec![0.0; l.conv.bias.len()],
                    bn: l.bn.as_ref().map(|bn| (vec![0.0; bn.channels()], vec![0.0; bn.channels()])),
                })
                .collect(),
        };
        grads.layers[1].bias[2] = f64::NAN;
        let before = p.clone();
        let mut s = AdamState::for_params(&p, 1e-3);
        let err = adam_step(&mut p, &grads, &mut s).unwrap_err();
        assert!(err.to_string().contains("layer 1 bias"), "{err}");
        assert_eq!(p, before);
        assert_eq!(s.step, 0);
    }

    #[test]
    fn identical_inputs_give_identical_trajectories() {
        let run = || {
            let mut theta = vec![0.3, -0.2, 1.0];
            let mut s = AdamState::with_block_lens(&[3], 0.01);
            for k in 0..50 {
                let g: Vec<f64> = theta.iter().map(|t| 2.0 * t + (k as f64).sin()).collect();
                s.update(&mut [&mut theta[..]], &[&g]).unwrap();
            }
            theta
        };
        let a = run();
        let b = run();
        assert_eq!(
            a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }
}
