//! Image-classification fine-tuning on a small, dependency-light stack.
//!
//! The crate is layered bottom-up:
//!
//! * [`tensor`]: dense `f64` tensors, a gradient tape for reverse-mode
//!   differentiation, and the deterministic SplitMix64 generator in [`rng`].
//! * [`nn`]: convolution, batch normalization, pooling, dense, dropout,
//!   softmax / cross-entropy and the Adam optimizer.
//! * [`vision`]: image decoding, the resize → sharpen → colour → scale chain
//!   and the affine augmentation engine.
//! * [`data`]: directory ingestion, stratified and k-fold splits, synthetic
//!   texture datasets.
//! * [`model`]: the compound-scaled backbone family, head surgery,
//!   trainability policies and checkpoints.
//! * [`train`]: the seeded training loop, evaluation and the
//!   pretrain-then-finetune procedure.
//! * [`metrics`]: confusion matrices, macro precision/recall/F1, percent-scale
//!   index error metrics and report writers.

pub mod data;
pub mod error;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod rng;
pub mod tensor;
pub mod train;
pub mod vision;

pub use error::{Error, Result};
pub use rng::RngState;
pub use tensor::{Tape, Tensor, Var};
