use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::nn::PoolKind;

/// Depth multiplier per unit of `phi`.
pub const ALPHA: f64 = 1.2;
/// Width multiplier per unit of `phi`.
pub const BETA: f64 = 1.1;
/// Resolution multiplier per unit of `phi`.
pub const GAMMA: f64 = 1.15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackboneConfig {
    /// Number of conv blocks at `phi = 0`.
    pub base_blocks: usize,
    /// Channels of the first conv at `phi = 0`.
    pub base_channels: usize,
    /// Compound scaling coefficient.
    pub phi: f64,
    /// Input side at `phi = 0`.
    pub input_side: usize,
    pub skip_connections: bool,
}

impl Default for BackboneConfig {
    fn default() -> Self {
        BackboneConfig {
            base_blocks: 4,
            base_channels: 8,
            phi: 0.0,
            input_side: 256,
            skip_connections: false,
        }
    }
}

/// Effective network dimensions after compound scaling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaledDims {
    pub depth: usize,
    pub width: usize,
    pub resolution: usize,
    /// Stride-2 stages (one per pair of blocks).
    pub stages: usize,
}

impl BackboneConfig {
    /// Small stand-ins named after the architectures of the original
    /// comparison. They share the block structure and differ only in depth,
    /// width, skips and scaling.
    pub fn preset(name: &str, input_side: usize) -> Option<Self> {
        let (base_blocks, base_channels, phi, skip) = match name {
            "xception" => (4, 8, 0.0, false),
            "inception_resnet_v2" => (6, 8, 0.0, true),
            "resnet50" => (4, 8, 0.0, true),
            "resnet50_v2" => (4, 12, 0.0, true),
            "efficientnet_b0" => (4, 8, 0.0, false),
            "efficientnet_b4" => (4, 8, 1.0, false),
            _ => return None,
        };
        Some(BackboneConfig { base_blocks, base_channels, phi, input_side, skip_connections: skip })
    }

    pub const PRESETS: [&'static str; 6] = [
        "xception",
        "inception_resnet_v2",
        "resnet50",
        "resnet50_v2",
        "efficientnet_b0",
        "efficientnet_b4",
    ];

    /// `depth = round(blocks·α^φ)`, `width = round(channels·β^φ)`,
    /// `resolution = round(side·γ^φ)` snapped down to a multiple of
    /// `2^stages` when `φ > 0`. At `φ = 0` the side must already divide.
    pub fn scaled(&self) -> Result<ScaledDims> {
        if self.base_blocks < 1 {
            return invalid("base_blocks must be at least 1");
        }
        if self.base_channels < 4 {
            return invalid(format!("base_channels must be at least 4, got {}", self.base_channels));
        }
        if !(self.phi >= 0.0 && self.phi.is_finite()) {
            return invalid(format!("phi must be a nonnegative number, got {}", self.phi));
        }
        let depth = (self.base_blocks as f64 * ALPHA.powf(self.phi)).round() as usize;
        let width = (self.base_channels as f64 * BETA.powf(self.phi)).round() as usize;
        let raw = (self.input_side as f64 * GAMMA.powf(self.phi)).round() as usize;
        let stages = depth.div_ceil(2);
        let unit = 1usize << stages;
        let resolution = if self.phi == 0.0 {
            if raw == 0 || raw % unit != 0 {
                return invalid(format!(
                    "input side {raw} is not divisible by 2^{stages} = {unit}"
                ));
            }
            raw
        } else {
            let snapped = raw / unit * unit;
            if snapped == 0 {
                return invalid(format!("scaled side {raw} is smaller than 2^{stages}"));
            }
            snapped
        };
        Ok(ScaledDims { depth, width, resolution, stages })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeadConfig {
    pub pooling: PoolKind,
    pub dense_units: usize,
    pub dropout_rate: f64,
    pub num_classes: usize,
}

impl Default for HeadConfig {
    fn default() -> Self {
        HeadConfig {
            pooling: PoolKind::Avg,
            dense_units: 128,
            dropout_rate: 0.2,
            num_classes: 2,
        }
    }
}

impl HeadConfig {
    pub fn with_classes(num_classes: usize) -> Self {
        HeadConfig { num_classes, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return invalid(format!("head needs at least 2 classes, got {}", self.num_classes));
        }
        if self.dense_units < 1 {
            return invalid("dense_units must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return invalid(format!("dropout rate must lie in [0, 1), got {}", self.dropout_rate));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_case() {
        let cfg = BackboneConfig { input_side: 64, ..Default::default() };
        let d = cfg.scaled().unwrap();
        assert_eq!((d.depth, d.width, d.resolution, d.stages), (4, 8, 64, 2));
    }

    #[test]
    fn phi_one() {
        // round(4·1.2) = 5, round(8·1.1) = 9, round(64·1.15) = 74 → 3 stages,
        // snapped down to a multiple of 8 = 72.
        let cfg = BackboneConfig { input_side: 64, phi: 1.0, ..Default::default() };
        let d = cfg.scaled().unwrap();
        assert_eq!((d.depth, d.width, d.stages), (5, 9, 3));
        assert_eq!((64.0f64 * 1.15).round(), 74.0);
        assert_eq!(d.resolution, 72);
    }

    #[test]
    fn indivisible_side_rejected() {
        let cfg = BackboneConfig { input_side: 66, ..Default::default() };
        assert!(cfg.scaled().is_err());
    }

    #[test]
    fn presets_resolve() {
        for name in BackboneConfig::PRESETS {
            BackboneConfig::preset(name, 64).unwrap().scaled().unwrap();
        }
        assert!(BackboneConfig::preset("vgg16", 64).is_none());
    }

    #[test]
    fn head_validation() {
        assert!(HeadConfig::with_classes(1).validate().is_err());
        assert!(HeadConfig { dropout_rate: 1.0, ..Default::default() }.validate().is_err());
        HeadConfig::default().validate().unwrap();
    }
}
