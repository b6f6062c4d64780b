use crate::error::{ensure, Result};
use crate::layers::{BatchNormLayer, ConvLayer};
use crate::model::config::ModelConfig;
use crate::tensor::Tensor4;

/// One convolution stage with its optional batch norm and activation.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub conv: ConvLayer,
    pub bn: Option<BatchNormLayer>,
    pub relu: bool,
}

/// Trainable state of a network together with its configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet {
    pub config: ModelConfig,
    pub layers: Vec<Layer>,
    /// Batch norm has been folded into the convolutions.
    pub bn_merged: bool,
}

impl ParameterSet {
    /// Network skeleton with zero filters/biases and identity batch norms.
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let last = config.num_layers - 1;
        let layers = (0..config.num_layers)
            .map(|i| {
                let cin = if i == 0 {
                    config.network_input_channels()
                } else {
                    config.num_channels
                };
                let cout = if i == last {
                    config.sub_image_channels()
                } else {
                    config.num_channels
                };
                Layer {
                    conv: ConvLayer::zeros(cout, cin),
                    bn: (i > 0 && i < last).then(|| BatchNormLayer::new(cout)),
                    relu: i < last,
                }
            })
            .collect();
        Ok(Self {
            config,
            layers,
            bn_merged: false,
        })
    }

    /// Checks the layer structure against the configuration.
    pub fn validate(&self) -> Result<()> {
        let cfg = &self.config;
        cfg.validate()?;
        ensure!(
            self.layers.len() == cfg.num_layers,
            "config declares {} layers, parameter set has {}",
            cfg.num_layers,
            self.layers.len()
        );
        let last = cfg.num_layers - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.conv.validate()?;
            let cin = if i == 0 {
                cfg.network_input_channels()
            } else {
                cfg.num_channels
            };
            let cout = if i == last {
                cfg.sub_image_channels()
            } else {
                cfg.num_channels
            };
            ensure!(
                layer.conv.in_channels() == cin && layer.conv.out_channels() == cout,
                "layer {i} maps {} -> {} channels, expected {cin} -> {cout}",
                layer.conv.in_channels(),
                layer.conv.out_channels()
            );
            ensure!(layer.relu == (i < last), "layer {i} has the wrong activation");
            let wants_bn = !self.bn_merged && i > 0 && i < last;
            ensure!(
                layer.bn.is_some() == wants_bn,
                "layer {i} {} batch norm",
                if wants_bn { "is missing" } else { "must not have" }
            );
            if let Some(bn) = &layer.bn {
                bn.validate()?;
                ensure!(bn.channels() == cout, "layer {i} batch norm has the wrong width");
            }
        }
        Ok(())
    }

    pub fn num_parameters(&self) -> usize {
        self.trainable_blocks().iter().map(|b| b.len()).sum()
    }

    /// Human-readable names of the trainable blocks, in block order.
    pub fn block_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            names.push(format!("layer {i} weights"));
            names.push(format!("layer {i} bias"));
            if layer.bn.is_some() {
                names.push(format!("layer {i} bn gamma"));
                names.push(format!("layer {i} bn beta"));
            }
        }
        names
    }

    pub fn trainable_blocks(&self) -> Vec<&[f64]> {
        let mut blocks: Vec<&[f64]> = Vec::new();
        for layer in &self.layers {
            blocks.push(layer.conv.weights.data());
            blocks.push(&layer.conv.bias);
            if let Some(bn) = &layer.bn {
                blocks.push(&bn.gamma);
                blocks.push(&bn.beta);
            }
        }
        blocks
    }

    pub fn trainable_blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut blocks: Vec<&mut [f64]> = Vec::new();
        for layer in &mut self.layers {
            blocks.push(layer.conv.weights.data_mut());
            blocks.push(&mut layer.conv.bias);
            if let Some(bn) = &mut layer.bn {
                blocks.push(&mut bn.gamma);
                blocks.push(&mut bn.beta);
            }
        }
        blocks
    }
}

/// Gradients for one [`Layer`].
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub weights: Tensor4,
    pub bias: Vec<f64>,
    /// `(gamma, beta)` gradients when the layer has batch norm.
    pub bn: Option<(Vec<f64>, Vec<f64>)>,
}

/// Gradients shaped like a [`ParameterSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub layers: Vec<LayerGrads>,
}

impl ParamGrads {
    /// Blocks in the same order as [`ParameterSet::trainable_blocks`].
    pub fn blocks(&self) -> Vec<&[f64]> {
        let mut blocks: Vec<&[f64]> = Vec::new();
        for layer in &self.layers {
            blocks.push(layer.weights.data());
            blocks.push(&layer.bias);
            if let Some((g, b)) = &layer.bn {
                blocks.push(g);
                blocks.push(b);
            }
        }
        blocks
    }

    pub fn max_abs(&self) -> f64 {
        self.blocks()
            .iter()
            .flat_map(|b| b.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn skeleton_matches_architecture() {
        let p = ParameterSet::zeros(ModelConfig::grayscale()).unwrap();
        p.validate().unwrap();
        assert_eq!(p.layers.len(), 15);
        assert_eq!(p.layers[0].conv.in_channels(), 5);
        assert!(p.layers[0].bn.is_none() && p.layers[0].relu);
        assert!(p.layers[7].bn.is_some() && p.layers[7].relu);
        let last = &p.layers[14];
        assert_eq!(last.conv.out_channels(), 4);
        assert!(last.bn.is_none() && !last.relu);
        assert_eq!(p.block_names().len(), p.trainable_blocks().len());
    }

    #[test]
    fn validate_catches_structural_errors() {
        let mut p = ParameterSet::zeros(ModelConfig::new(3, 4, 1)).unwrap();
        p.layers[2].relu = true;
        assert!(p.validate().is_err());
        let mut p = ParameterSet::zeros(ModelConfig::new(3, 4, 1)).unwrap();
        p.bn_merged = true;
        assert!(p.validate().is_err());
        let mut p = ParameterSet::zeros(ModelConfig::new(3, 4, 1)).unwrap();
        p.layers.pop();
        assert!(p.validate().is_err());
    }
}
