use super::config::{TrainConfig, TrainLog};
use super::engine::train;
use crate::data::{stratified_split, Dataset, SplitIndices};
use crate::error::Result;
use crate::model::{build_backbone, truncate_and_attach_head, BackboneConfig, HeadConfig, Model};
use crate::rng::{RngState, Stream};

/// Fraction of each class assigned to train / validation / test.
pub const SPLIT_RATIOS: (f64, f64, f64) = (0.8, 0.1, 0.1);

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TransferConfig {
    pub backbone: BackboneConfig,
    /// `num_classes` is overridden by each dataset's class count.
    pub head: HeadConfig,
    pub pretrain: TrainConfig,
    pub finetune: TrainConfig,
}

#[derive(Debug, Clone)]
pub struct TransferOutcome {
    pub model: Model,
    pub pretrain_log: TrainLog,
    pub finetune_log: TrainLog,
    pub source_split: SplitIndices,
    pub target_split: SplitIndices,
}

fn fresh_model(backbone: &BackboneConfig, head: &HeadConfig, classes: usize, seed: u64) -> Result<Model> {
    let base = build_backbone(backbone, RngState::stream(seed, Stream::Init, 0, 0))?;
    let head = HeadConfig { num_classes: classes, ..head.clone() };
    truncate_and_attach_head(&base, &head, RngState::stream(seed, Stream::Init, 1, 0))
}

/// Trains a freshly initialized backbone + head on `source`, split 80/10/10
/// with the pretrain seed.
pub fn pretrain(source: &Dataset, cfg: &TransferConfig) -> Result<(Model, TrainLog, SplitIndices)> {
    let split = stratified_split(source, SPLIT_RATIOS, cfg.pretrain.seed)?;
    let initial = fresh_model(&cfg.backbone, &cfg.head, source.num_classes(), cfg.pretrain.seed)?;
    let (m, log) = train(initial, source, &split, &cfg.pretrain)?;
    Ok((m, log, split))
}

/// Swaps the head of `pretrained` for one sized to `target`, applies the
/// finetune trainability policy and trains on `target`.
pub fn finetune(pretrained: &Model, target: &Dataset, cfg: &TransferConfig) -> Result<(Model, TrainLog, SplitIndices)> {
    let head = HeadConfig { num_classes: target.num_classes(), ..cfg.head.clone() };
    let rng = RngState::stream(cfg.finetune.seed, Stream::Init, 2, 0);
    let transferred = truncate_and_attach_head(pretrained, &head, rng)?;
    let split = stratified_split(target, SPLIT_RATIOS, cfg.finetune.seed)?;
    let (m, log) = train(transferred, target, &split, &cfg.finetune)?;
    Ok((m, log, split))
}

/// [`pretrain`] followed by [`finetune`]. Each dataset is split with its
/// stage's seed.
pub fn pretrain_then_finetune(source: &Dataset, target: &Dataset, cfg: &TransferConfig) -> Result<TransferOutcome> {
    let (pretrained, pretrain_log, source_split) = pretrain(source, cfg)?;
    let (model, finetune_log, target_split) = finetune(&pretrained, target, cfg)?;
    Ok(TransferOutcome { model, pretrain_log, finetune_log, source_split, target_split })
}

/// The baseline for [`pretrain_then_finetune`]: the same architecture,
/// freshly initialized and trained on `target` with the finetune budget.
pub fn from_scratch(target: &Dataset, cfg: &TransferConfig) -> Result<(Model, TrainLog, SplitIndices)> {
    let split = stratified_split(target, SPLIT_RATIOS, cfg.finetune.seed)?;
    let m = fresh_model(&cfg.backbone, &cfg.head, target.num_classes(), cfg.finetune.seed)?;
    let (m, log) = train(m, target, &split, &cfg.finetune)?;
    Ok((m, log, split))
}
