use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::TrainablePolicy;
use crate::vision::{AugmentConfig, SourceOrder};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    pub augment: Option<AugmentConfig>,
    pub trainable_policy: TrainablePolicy,
    /// Channel order of the stored images; set from the data section.
    #[serde(skip)]
    pub source_order: SourceOrder,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 25,
            batch_size: 32,
            lr: 1e-4,
            seed: 1000,
            augment: Some(AugmentConfig::default()),
            trainable_policy: TrainablePolicy::All,
            source_order: SourceOrder::Rgb,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return invalid("epochs must be at least 1");
        }
        if self.batch_size < 2 {
            return invalid(format!("batch_size must be at least 2, got {}", self.batch_size));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return invalid(format!("lr must be positive, got {}", self.lr));
        }
        if let Some(a) = &self.augment {
            a.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRow {
    pub epoch: usize,
    pub train_loss: f64,
    /// Percent.
    pub train_acc: f64,
    pub val_loss: f64,
    /// Percent.
    pub val_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainLog {
    pub rows: Vec<EpochRow>,
    pub wall_seconds: f64,
}

const HEADER: &str = "epoch,train_loss,train_acc,val_loss,val_acc";

impl TrainLog {
    /// One line per epoch, six decimals, LF line endings.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{:.6},{:.6},{:.6},{:.6}",
                r.epoch, r.train_loss, r.train_acc, r.val_loss, r.val_acc
            );
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(HEADER) {
            return Err(Error::Data(format!("train log must start with `{HEADER}`")));
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let f: Vec<&str> = line.split(',').collect();
            let bad = || Error::Data(format!("train log row {}: `{line}`", i + 1));
            if f.len() != 5 {
                return Err(bad());
            }
            let num = |j: usize| f[j].parse::<f64>().map_err(|_| bad());
            rows.push(EpochRow {
                epoch: f[0].parse().map_err(|_| bad())?,
                train_loss: num(1)?,
                train_acc: num(2)?,
                val_loss: num(3)?,
                val_acc: num(4)?,
            });
        }
        Ok(TrainLog { rows, wall_seconds: 0.0 })
    }

    pub fn final_row(&self) -> Option<&EpochRow> {
        self.rows.last()
    }
}
