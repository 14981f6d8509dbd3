use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// `counts[actual][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
    class_names: Vec<String>,
}

impl ConfusionMatrix {
    /// Builds a matrix from explicit counts. Empty `class_names` yields
    /// `class0, class1, …`.
    pub fn from_counts(counts: Vec<Vec<u64>>, class_names: Vec<String>) -> Result<Self> {
        let k = counts.len();
        if k == 0 {
            return invalid("confusion matrix needs at least one class");
        }
        if let Some(r) = counts.iter().position(|row| row.len() != k) {
            return invalid(format!("row {r} has {} cells, expected {k}", counts[r].len()));
        }
        let class_names = if class_names.is_empty() {
            (0..k).map(|c| format!("class{c}")).collect()
        } else if class_names.len() == k {
            class_names
        } else {
            return invalid(format!("{} class names for {k} classes", class_names.len()));
        };
        Ok(ConfusionMatrix { counts, class_names })
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.num_classes()).map(|c| self.counts[c][c]).sum()
    }

    pub fn true_positives(&self, c: usize) -> u64 {
        self.counts[c][c]
    }

    pub fn false_positives(&self, c: usize) -> u64 {
        self.counts.iter().map(|row| row[c]).sum::<u64>() - self.counts[c][c]
    }

    pub fn false_negatives(&self, c: usize) -> u64 {
        self.counts[c].iter().sum::<u64>() - self.counts[c][c]
    }

    pub fn true_negatives(&self, c: usize) -> u64 {
        self.total() - self.true_positives(c) - self.false_positives(c) - self.false_negatives(c)
    }
}

/// Tallies `(actual, predicted)` pairs into a `k × k` matrix.
pub fn confusion_matrix(predicted: &[usize], actual: &[usize], k: usize) -> Result<ConfusionMatrix> {
    if predicted.len() != actual.len() {
        return invalid(format!("{} predictions for {} labels", predicted.len(), actual.len()));
    }
    if k == 0 {
        return invalid("confusion matrix needs at least one class");
    }
    let mut counts = vec![vec![0u64; k]; k];
    for (i, (&p, &a)) in predicted.iter().zip(actual).enumerate() {
        if p >= k || a >= k {
            return invalid(format!("sample {i}: label pair ({a}, {p}) outside 0..{k}"));
        }
        counts[a][p] += 1;
    }
    ConfusionMatrix::from_counts(counts, Vec::new())
}
