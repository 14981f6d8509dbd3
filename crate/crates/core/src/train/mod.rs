//! Deterministic training loop, evaluation, checkpoints and the
//! pretrain-then-finetune procedure.

mod checkpoint;
mod config;
mod engine;
mod transfer;

pub use checkpoint::{checkpoint_bytes, checkpoint_from_bytes, checkpoint_load, checkpoint_save, FORMAT_VERSION, MAGIC};
pub use config::{EpochRow, TrainConfig, TrainLog};
pub use engine::{batch_boundaries, evaluate, train, Evaluation};
pub use transfer::{finetune, from_scratch, pretrain, pretrain_then_finetune, TransferConfig, TransferOutcome, SPLIT_RATIOS};
