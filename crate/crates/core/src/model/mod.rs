//! Compound-scaled backbone family, head surgery and trainability policy.

mod config;
mod layer;
mod network;
mod predict;

pub use config::{BackboneConfig, HeadConfig, ScaledDims, ALPHA, BETA, GAMMA};
pub use layer::{Layer, LayerSpec};
pub use network::{build_backbone, truncate_and_attach_head, ForwardPass, Model, TrainablePolicy};
pub use predict::{argmax_rows, predict, Prediction};
