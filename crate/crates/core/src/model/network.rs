use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::{BackboneConfig, HeadConfig};
use super::layer::Layer;
use crate::error::{invalid, shape_err, Error, Result};
use crate::nn::{
    batch_norm, conv2d, dense, dropout, global_pool, relu, softmax, AdamState, BatchNormState, ConvParams, Mode,
    Padding, ParamGrad,
};
use crate::rng::RngState;
use crate::tensor::{Tape, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainablePolicy {
    All,
    HeadOnly,
    FreezeFirstN(usize),
}

/// A layer stack with per-layer trainable flags.
///
/// Layers `[..head_start]` form the backbone; layers from `head_start` on
/// were attached by [`truncate_and_attach_head`].
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub(crate) layers: Vec<Layer>,
    pub(crate) trainable: Vec<bool>,
    pub(crate) backbone: BackboneConfig,
    pub(crate) head: Option<HeadConfig>,
    pub(crate) class_names: Vec<String>,
    pub(crate) input_side: usize,
    pub(crate) head_start: usize,
}

/// Variables produced by [`Model::forward_tape`].
pub struct ForwardPass {
    /// Pre-softmax scores (the network output if it has no softmax).
    pub logits: Var,
    /// Final output (probabilities when the network ends in softmax).
    pub output: Var,
    /// `(name, layer index, var)` for every parameter loaded as trainable.
    pub params: Vec<(String, usize, Var)>,
}

fn param_name(layer: usize, kind: &str, slot: &str) -> String {
    format!("{layer:03}.{kind}.{slot}")
}

impl Model {
    /// Assembles a model from explicit layers; all layers start trainable.
    pub fn from_layers(
        layers: Vec<Layer>,
        backbone: BackboneConfig,
        head: Option<HeadConfig>,
        class_names: Vec<String>,
        input_side: usize,
        head_start: usize,
    ) -> Result<Self> {
        if head_start > layers.len() {
            return invalid(format!("head start {head_start} beyond {} layers", layers.len()));
        }
        for (i, l) in layers.iter().enumerate() {
            if let Layer::AddSkip { from } = l {
                if *from >= i {
                    return invalid(format!("skip at layer {i} refers forward to {from}"));
                }
            }
        }
        let trainable = vec![true; layers.len()];
        Ok(Model { layers, trainable, backbone, head, class_names, input_side, head_start })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn trainable_flags(&self) -> &[bool] {
        &self.trainable
    }

    pub fn backbone_config(&self) -> &BackboneConfig {
        &self.backbone
    }

    pub fn head_config(&self) -> Option<&HeadConfig> {
        self.head.as_ref()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn set_class_names(&mut self, names: Vec<String>) {
        self.class_names = names;
    }

    pub fn input_side(&self) -> usize {
        self.input_side
    }

    pub fn head_start(&self) -> usize {
        self.head_start
    }

    pub fn num_classes(&self) -> Option<usize> {
        self.head.as_ref().map(|h| h.num_classes)
    }

    /// All stored tensors in manifest order, named `NNN.kind.slot`.
    pub fn named_state(&self) -> Vec<(String, &Tensor)> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| l.state().into_iter().map(move |(s, t)| (param_name(i, l.kind(), s), t)))
            .collect()
    }

    /// Raw bit patterns of every stored tensor in layers `range`.
    pub fn state_bits(&self, range: std::ops::Range<usize>) -> Vec<u64> {
        self.layers[range]
            .iter()
            .flat_map(|l| l.state())
            .flat_map(|(_, t)| t.data().iter().map(|v| v.to_bits()))
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().flat_map(|l| l.params()).map(|(_, t)| t.len()).sum()
    }

    pub fn set_trainable(&mut self, policy: TrainablePolicy) -> Result<()> {
        let n = self.layers.len();
        let first_trainable = match policy {
            TrainablePolicy::All => 0,
            TrainablePolicy::HeadOnly => self.head_start,
            TrainablePolicy::FreezeFirstN(k) => {
                if k > n {
                    return invalid(format!("cannot freeze {k} of {n} layers"));
                }
                k
            }
        };
        for (i, flag) in self.trainable.iter_mut().enumerate() {
            *flag = i >= first_trainable;
        }
        Ok(())
    }

    fn check_input(&self, shape: &[usize]) -> Result<()> {
        let s = self.input_side;
        match shape {
            [_, 3, h, w] if *h == s && *w == s => Ok(()),
            _ => shape_err(format!("model expects [N×3×{s}×{s}] input, got {shape:?}")),
        }
    }

    /// Records the network on `tape`. Trainable parameters are loaded as
    /// gradient-carrying leaves in training mode; batch norm in frozen
    /// layers runs with its running statistics.
    pub fn forward_tape(&mut self, tape: &mut Tape, x: Var, mode: Mode, rng: RngState) -> Result<ForwardPass> {
        self.check_input(tape.shape(x))?;
        let mut rng = rng;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut params = Vec::new();
        let mut cur = x;
        let mut logits = None;
        let last = self.layers.len().saturating_sub(1);
        for (i, layer) in self.layers.iter_mut().enumerate() {
            inputs.push(cur);
            let learn = mode == Mode::Train && self.trainable[i];
            let kind = layer.kind();
            let mut load = |tape: &mut Tape, slot: &str, t: &Tensor| {
                if learn {
                    let v = tape.param(t.clone());
                    params.push((param_name(i, kind, slot), i, v));
                    v
                } else {
                    tape.constant(t.clone())
                }
            };
            cur = match layer {
                Layer::Conv(p) => {
                    let k = load(tape, "kernels", &p.kernels);
                    let b = load(tape, "bias", &p.bias);
                    conv2d(tape, cur, k, b, p.stride, p.padding)?
                }
                Layer::BatchNorm(state) => {
                    let g = load(tape, "gamma", &state.gamma);
                    let b = load(tape, "beta", &state.beta);
                    let bn_mode = if learn { Mode::Train } else { Mode::Infer };
                    batch_norm(tape, cur, g, b, state, bn_mode)?
                }
                Layer::Relu => relu(tape, cur)?,
                Layer::AddSkip { from } => tape.add(cur, inputs[*from])?,
                Layer::GlobalPool(kind) => global_pool(tape, cur, *kind)?,
                Layer::Dense { weights, bias } => {
                    let w = load(tape, "weights", weights);
                    let b = load(tape, "bias", bias);
                    dense(tape, cur, w, b)?
                }
                Layer::Dropout { rate } => {
                    let (y, next) = dropout(tape, cur, *rate, mode, rng)?;
                    rng = next;
                    y
                }
                Layer::Softmax => {
                    if i == last {
                        logits = Some(cur);
                    }
                    softmax(tape, cur)?
                }
            };
        }
        Ok(ForwardPass { logits: logits.unwrap_or(cur), output: cur, params })
    }

    /// Class probabilities for `batch: [N×3×S×S]`. Training mode uses batch
    /// statistics (updating running statistics) and dropout masks drawn
    /// from `rng`; inference mode is deterministic and leaves the model
    /// untouched.
    pub fn forward(&mut self, batch: &Tensor, mode: Mode, rng: RngState) -> Result<Tensor> {
        let mut tape = Tape::new();
        let x = tape.constant(batch.clone());
        let pass = self.forward_tape(&mut tape, x, mode, rng)?;
        Ok(tape.take(pass.output))
    }

    /// Inference-mode forward pass without mutating the model.
    pub fn infer(&self, batch: &Tensor) -> Result<Tensor> {
        self.check_input(batch.shape())?;
        let mut scratch = self.clone();
        scratch.forward(batch, Mode::Infer, RngState::new(0))
    }

    /// Applies one Adam step using the gradients recorded for `pass`.
    pub fn apply_gradients(
        &mut self,
        tape: &Tape,
        pass: &ForwardPass,
        adam: &mut AdamState,
        lr: f64,
    ) -> Result<()> {
        let mut grads: BTreeMap<(usize, &str), (&str, Vec<f64>)> = BTreeMap::new();
        for (name, layer, var) in &pass.params {
            let slot = name.rsplit('.').next().unwrap_or_default();
            let g = match tape.grad(*var) {
                Some(g) => g.to_vec(),
                None => vec![0.0; tape.value(*var).len()],
            };
            grads.insert((*layer, slot), (name.as_str(), g));
        }
        let mut slots: Vec<ParamGrad<'_>> = Vec::with_capacity(grads.len());
        for (i, layer) in self.layers.iter_mut().enumerate() {
            for (slot, tensor) in layer.params_mut() {
                if let Some((name, g)) = grads.get(&(i, slot)) {
                    slots.push(ParamGrad { name, value: tensor.data_mut(), grad: g });
                }
            }
        }
        if slots.len() != grads.len() {
            return Err(Error::InvalidArgument("gradient list does not match model parameters".into()));
        }
        adam.step(lr, &mut slots)
    }
}

/// Stack of `[conv3×3 → batch_norm → (skip) → relu]` blocks. The first
/// block of every pair downsamples with stride 2; stage `s` has
/// `width·2^s` channels, capped at `8·width`. Skips join blocks whose
/// input and output shapes agree.
pub fn build_backbone(cfg: &BackboneConfig, rng: RngState) -> Result<Model> {
    let dims = cfg.scaled()?;
    let mut rng = rng;
    let cap = dims.width * 8;
    let mut layers = Vec::new();
    let mut in_ch = 3;
    for block in 0..dims.depth {
        let stage = block / 2;
        let out_ch = (dims.width << stage.min(16)).min(cap);
        let stride = if block % 2 == 0 { 2 } else { 1 };
        let block_input = layers.len();
        layers.push(Layer::Conv(ConvParams::he_init(in_ch, out_ch, 3, stride, Padding::Same, &mut rng)?));
        layers.push(Layer::BatchNorm(BatchNormState::with_defaults(out_ch)?));
        if cfg.skip_connections && stride == 1 && in_ch == out_ch {
            layers.push(Layer::AddSkip { from: block_input });
        }
        layers.push(Layer::Relu);
        in_ch = out_ch;
    }
    let n = layers.len();
    Model::from_layers(layers, cfg.clone(), None, Vec::new(), dims.resolution, n)
}

/// Cut point: the last activation before the first global pooling layer
/// (or the last activation overall when the network has no pooling).
fn cut_index(layers: &[Layer]) -> Option<usize> {
    let limit = layers
        .iter()
        .position(|l| matches!(l, Layer::GlobalPool(_)))
        .unwrap_or(layers.len());
    layers[..limit].iter().rposition(Layer::is_activation)
}

fn feature_channels(layers: &[Layer]) -> Option<usize> {
    layers.iter().rev().find_map(|l| match l {
        Layer::Conv(p) => Some(p.out_channels()),
        Layer::Dense { weights, .. } => Some(weights.shape()[1]),
        _ => None,
    })
}

/// Removes every layer after the backbone's last activation and appends
/// `pool → batch_norm → dense → dropout → relu → dense → softmax`.
/// Retained layers keep their weights and trainable flags bit-exactly; the
/// new head is freshly initialized from `rng` and trainable.
pub fn truncate_and_attach_head(m: &Model, head: &HeadConfig, rng: RngState) -> Result<Model> {
    head.validate()?;
    let cut = cut_index(&m.layers)
        .ok_or_else(|| Error::InvalidArgument("model has no activation layer to cut after".into()))?;
    let mut layers: Vec<Layer> = m.layers[..=cut].to_vec();
    let mut trainable: Vec<bool> = m.trainable[..=cut].to_vec();
    let features = feature_channels(&layers)
        .ok_or_else(|| Error::InvalidArgument("no feature-producing layer before the cut".into()))?;
    let mut rng = rng;
    let head_start = layers.len();
    layers.push(Layer::GlobalPool(head.pooling));
    layers.push(Layer::BatchNorm(BatchNormState::with_defaults(features)?));
    layers.push(Layer::dense_he(features, head.dense_units, &mut rng)?);
    layers.push(Layer::Dropout { rate: head.dropout_rate });
    layers.push(Layer::Relu);
    layers.push(Layer::dense_he(head.dense_units, head.num_classes, &mut rng)?);
    layers.push(Layer::Softmax);
    trainable.resize(layers.len(), true);
    Ok(Model {
        layers,
        trainable,
        backbone: m.backbone.clone(),
        head: Some(head.clone()),
        class_names: Vec::new(),
        input_side: m.input_side,
        head_start,
    })
}
