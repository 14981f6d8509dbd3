use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Result};
use crate::nn::{BatchNormState, ConvParams, Padding, PoolKind};
use crate::rng::RngState;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv(ConvParams),
    BatchNorm(BatchNormState),
    Relu,
    /// Adds the input of layer `from` (an earlier index) to the running value.
    AddSkip { from: usize },
    GlobalPool(PoolKind),
    Dense { weights: Tensor, bias: Tensor },
    Dropout { rate: f64 },
    Softmax,
}

/// Parameter-free description of a layer, stored in checkpoint headers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv { in_ch: usize, out_ch: usize, kernel: usize, stride: usize, padding: Padding },
    BatchNorm { channels: usize, momentum: f64, eps: f64 },
    Relu,
    AddSkip { from: usize },
    GlobalPool { pool: PoolKind },
    Dense { in_features: usize, units: usize },
    Dropout { rate: f64 },
    Softmax,
}

impl Layer {
    pub fn dense_he(in_features: usize, units: usize, rng: &mut RngState) -> Result<Layer> {
        let std = (2.0 / in_features as f64).sqrt();
        let w = (0..in_features * units).map(|_| rng.normal() * std).collect();
        Ok(Layer::Dense {
            weights: Tensor::from_vec(&[in_features, units], w)?,
            bias: Tensor::zeros(&[units])?,
        })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Conv(_) => "conv",
            Layer::BatchNorm(_) => "batch_norm",
            Layer::Relu => "relu",
            Layer::AddSkip { .. } => "add_skip",
            Layer::GlobalPool(_) => "global_pool",
            Layer::Dense { .. } => "dense",
            Layer::Dropout { .. } => "dropout",
            Layer::Softmax => "softmax",
        }
    }

    pub fn is_activation(&self) -> bool {
        matches!(self, Layer::Relu)
    }

    /// Trainable tensors with their slot names, in fixed order.
    pub fn params(&self) -> Vec<(&'static str, &Tensor)> {
        match self {
            Layer::Conv(p) => vec![("kernels", &p.kernels), ("bias", &p.bias)],
            Layer::BatchNorm(s) => vec![("gamma", &s.gamma), ("beta", &s.beta)],
            Layer::Dense { weights, bias } => vec![("weights", weights), ("bias", bias)],
            _ => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        match self {
            Layer::Conv(p) => vec![("kernels", &mut p.kernels), ("bias", &mut p.bias)],
            Layer::BatchNorm(s) => vec![("gamma", &mut s.gamma), ("beta", &mut s.beta)],
            Layer::Dense { weights, bias } => vec![("weights", weights), ("bias", bias)],
            _ => Vec::new(),
        }
    }

    /// Every stored tensor (parameters plus running statistics).
    pub fn state(&self) -> Vec<(&'static str, &Tensor)> {
        match self {
            Layer::BatchNorm(s) => vec![
                ("gamma", &s.gamma),
                ("beta", &s.beta),
                ("running_mean", &s.running_mean),
                ("running_var", &s.running_var),
            ],
            other => other.params(),
        }
    }

    pub fn state_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        match self {
            Layer::BatchNorm(s) => vec![
                ("gamma", &mut s.gamma),
                ("beta", &mut s.beta),
                ("running_mean", &mut s.running_mean),
                ("running_var", &mut s.running_var),
            ],
            other => other.params_mut(),
        }
    }

    pub fn spec(&self) -> LayerSpec {
        match self {
            Layer::Conv(p) => LayerSpec::Conv {
                in_ch: p.in_channels(),
                out_ch: p.out_channels(),
                kernel: p.kernels.shape()[2],
                stride: p.stride,
                padding: p.padding,
            },
            Layer::BatchNorm(s) => LayerSpec::BatchNorm { channels: s.channels(), momentum: s.momentum, eps: s.eps },
            Layer::Relu => LayerSpec::Relu,
            Layer::AddSkip { from } => LayerSpec::AddSkip { from: *from },
            Layer::GlobalPool(k) => LayerSpec::GlobalPool { pool: *k },
            Layer::Dense { weights, .. } => LayerSpec::Dense {
                in_features: weights.shape()[0],
                units: weights.shape()[1],
            },
            Layer::Dropout { rate } => LayerSpec::Dropout { rate: *rate },
            Layer::Softmax => LayerSpec::Softmax,
        }
    }

    /// Zero-initialized layer matching `spec`, ready to receive stored state.
    pub fn from_spec(spec: &LayerSpec) -> Result<Layer> {
        Ok(match *spec {
            LayerSpec::Conv { in_ch, out_ch, kernel, stride, padding } => Layer::Conv(ConvParams::new(
                Tensor::zeros(&[out_ch, in_ch, kernel, kernel])?,
                Tensor::zeros(&[out_ch])?,
                stride,
                padding,
            )?),
            LayerSpec::BatchNorm { channels, momentum, eps } => {
                Layer::BatchNorm(BatchNormState::new(channels, momentum, eps)?)
            }
            LayerSpec::Relu => Layer::Relu,
            LayerSpec::AddSkip { from } => Layer::AddSkip { from },
            LayerSpec::GlobalPool { pool } => Layer::GlobalPool(pool),
            LayerSpec::Dense { in_features, units } => Layer::Dense {
                weights: Tensor::zeros(&[in_features, units])?,
                bias: Tensor::zeros(&[units])?,
            },
            LayerSpec::Dropout { rate } => {
                if !(0.0..1.0).contains(&rate) {
                    return shape_err(format!("dropout rate {rate} outside [0, 1)"));
                }
                Layer::Dropout { rate }
            }
            LayerSpec::Softmax => Layer::Softmax,
        })
    }
}
