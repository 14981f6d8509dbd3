//! The run configuration file: one JSON document per experiment.
//!
//! ```json
//! {
//!   "data": { "root": "target/", "source_root": "source/", "image_size": 64 },
//!   "backbone": "efficientnet_b0",
//!   "head": { "dense_units": 128 },
//!   "train": { "epochs": 25, "lr": 0.0001 },
//!   "augment": { "enable": true },
//!   "output": "runs/transfer"
//! }
//! ```
//!
//! Every section and key is optional; omitted keys take the library
//! defaults. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use fftune::model::{BackboneConfig, HeadConfig, TrainablePolicy};
use fftune::train::{TrainConfig, TransferConfig};
use fftune::vision::{AugmentConfig, AugmentMode, Fill, SourceOrder};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const DEFAULT_SEED: u64 = 1000;
pub const SEED_ENV: &str = "FF_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// Target dataset: a class-per-directory tree or a manifest CSV.
    pub root: Option<PathBuf>,
    /// Source dataset for pretraining (`finetune` only).
    pub source_root: Option<PathBuf>,
    pub source_channel_order: SourceOrder,
    pub image_size: usize,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection { root: None, source_root: None, source_channel_order: SourceOrder::Rgb, image_size: 256 }
    }
}

/// Either a preset name or explicit fields. `input_side` comes from
/// `data.image_size`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BackboneSection {
    Preset(String),
    Fields(BackboneFields),
}

impl Default for BackboneSection {
    fn default() -> Self {
        BackboneSection::Fields(BackboneFields::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackboneFields {
    pub base_blocks: usize,
    pub base_channels: usize,
    pub phi: f64,
    pub skip_connections: bool,
}

impl Default for BackboneFields {
    fn default() -> Self {
        let d = BackboneConfig::default();
        BackboneFields {
            base_blocks: d.base_blocks,
            base_channels: d.base_channels,
            phi: d.phi,
            skip_connections: d.skip_connections,
        }
    }
}

/// Training hyperparameters for one stage. Augmentation lives in its own
/// section and the seed falls back to the resolved run seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StageSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: Option<u64>,
    pub trainable_policy: TrainablePolicy,
}

impl Default for StageSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        StageSection {
            epochs: d.epochs,
            batch_size: d.batch_size,
            lr: d.lr,
            seed: None,
            trainable_policy: d.trainable_policy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentSection {
    pub enable: bool,
    pub rotation_deg: f64,
    pub zoom: (f64, f64),
    pub shear_deg: f64,
    pub flip_prob: f64,
    pub op_weights: [f64; 4],
    pub mode: AugmentMode,
    pub fill: Fill,
}

impl Default for AugmentSection {
    fn default() -> Self {
        let d = AugmentConfig::default();
        AugmentSection {
            enable: true,
            rotation_deg: d.rotation_deg,
            zoom: d.zoom,
            shear_deg: d.shear_deg,
            flip_prob: d.flip_prob,
            op_weights: d.op_weights,
            mode: d.mode,
            fill: d.fill,
        }
    }
}

impl AugmentSection {
    fn resolve(&self) -> Option<AugmentConfig> {
        self.enable.then(|| AugmentConfig {
            rotation_deg: self.rotation_deg,
            zoom: self.zoom,
            shear_deg: self.shear_deg,
            flip_prob: self.flip_prob,
            op_weights: self.op_weights,
            mode: self.mode,
            fill: self.fill,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSection,
    pub backbone: BackboneSection,
    pub head: HeadConfig,
    pub train: StageSection,
    /// Pretraining stage of `finetune`; defaults to the `train` section
    /// with every layer trainable.
    pub pretrain: Option<StageSection>,
    pub augment: AugmentSection,
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| fftune::Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn backbone_config(&self) -> Result<BackboneConfig, CliError> {
        let side = self.data.image_size;
        match &self.backbone {
            BackboneSection::Preset(name) => BackboneConfig::preset(name, side).ok_or_else(|| {
                CliError::Usage(format!(
                    "unknown backbone preset {name:?}; expected one of {}",
                    BackboneConfig::PRESETS.join(", ")
                ))
            }),
            BackboneSection::Fields(f) => Ok(BackboneConfig {
                base_blocks: f.base_blocks,
                base_channels: f.base_channels,
                phi: f.phi,
                input_side: side,
                skip_connections: f.skip_connections,
            }),
        }
    }

    fn stage(&self, s: &StageSection, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: s.epochs,
            batch_size: s.batch_size,
            lr: s.lr,
            seed: s.seed.unwrap_or(seed),
            augment: self.augment.resolve(),
            trainable_policy: s.trainable_policy,
            source_order: self.data.source_channel_order,
        }
    }

    /// Full transfer settings. `seed` is the resolved run seed; it replaces
    /// the `train` section seed and fills in a missing pretrain seed.
    pub fn transfer_config(&self, seed: u64) -> Result<TransferConfig, CliError> {
        let finetune = TrainConfig { seed, ..self.stage(&self.train, seed) };
        let pretrain = match &self.pretrain {
            Some(p) => self.stage(p, seed),
            None => TrainConfig { trainable_policy: TrainablePolicy::All, ..finetune.clone() },
        };
        self.head.validate()?;
        finetune.validate()?;
        pretrain.validate()?;
        Ok(TransferConfig { backbone: self.backbone_config()?, head: self.head.clone(), pretrain, finetune })
    }
}

/// `flag > FF_SEED > config > 1000`.
pub fn resolve_seed(flag: Option<u64>, env: Option<&str>, config: Option<u64>) -> Result<u64, CliError> {
    if let Some(s) = flag {
        return Ok(s);
    }
    if let Some(v) = env {
        return v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{SEED_ENV}={v:?} is not an unsigned integer")));
    }
    Ok(config.unwrap_or(DEFAULT_SEED))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_takes_library_defaults() {
        let c = RunConfig::from_json("{}").unwrap();
        let t = c.transfer_config(1000).unwrap();
        assert_eq!(t.finetune, TrainConfig::default());
        assert_eq!(t.head, HeadConfig::default());
        assert_eq!(t.backbone, BackboneConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_json(r#"{"trian": {}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"train": {"epoch": 3}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"augment": {"rotate": 3}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"backbone": {"blocks": 3}}"#).is_err());
    }

    #[test]
    fn preset_and_image_size() {
        let c = RunConfig::from_json(r#"{"backbone": "resnet50", "data": {"image_size": 64}}"#).unwrap();
        let b = c.backbone_config().unwrap();
        assert!(b.skip_connections);
        assert_eq!(b.input_side, 64);
        let bad = RunConfig::from_json(r#"{"backbone": "vgg"}"#).unwrap();
        assert!(bad.backbone_config().is_err());
    }

    #[test]
    fn augment_can_be_disabled() {
        let c = RunConfig::from_json(r#"{"augment": {"enable": false}}"#).unwrap();
        assert_eq!(c.transfer_config(1).unwrap().finetune.augment, None);
    }

    #[test]
    fn seed_precedence() {
        assert_eq!(resolve_seed(Some(1), Some("2"), Some(3)).unwrap(), 1);
        assert_eq!(resolve_seed(None, Some("2"), Some(3)).unwrap(), 2);
        assert_eq!(resolve_seed(None, None, Some(3)).unwrap(), 3);
        assert_eq!(resolve_seed(None, None, None).unwrap(), DEFAULT_SEED);
        assert!(resolve_seed(None, Some("x"), None).is_err());
    }

    #[test]
    fn pretrain_defaults_to_all_layers() {
        let c = RunConfig::from_json(r#"{"train": {"trainable_policy": "head_only", "seed": 5}}"#).unwrap();
        let t = c.transfer_config(7).unwrap();
        assert_eq!(t.finetune.seed, 7);
        assert_eq!(t.pretrain.seed, 7);
        assert_eq!(t.pretrain.trainable_policy, TrainablePolicy::All);
        assert_eq!(t.finetune.trainable_policy, TrainablePolicy::HeadOnly);
    }
}
