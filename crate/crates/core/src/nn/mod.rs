//! Layers, losses and the Adam optimizer, all recorded on a [`Tape`].
//!
//! [`Tape`]: crate::tensor::Tape

mod adam;
mod batchnorm;
mod conv;
mod dense;
mod dropout;
mod loss;
mod pool;
mod relu;
mod softmax;

pub use adam::{AdamState, ParamGrad};
pub use batchnorm::{batch_norm, BatchNormState};
pub use conv::{conv2d, conv_output_extent, ConvParams, Padding};
pub use dense::dense;
pub use dropout::{dropout, dropout_mask};
pub use loss::{softmax_cross_entropy, sparse_ce_loss};
pub use pool::{global_pool, PoolKind};
pub use relu::relu;
pub use softmax::{softmax, softmax_rows};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Infer,
}
