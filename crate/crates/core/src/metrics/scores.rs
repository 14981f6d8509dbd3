use serde::{Deserialize, Serialize};

use super::confusion::ConfusionMatrix;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Unweighted means over classes, in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacroScores {
    pub precision_pct: f64,
    pub recall_pct: f64,
    pub f1_pct: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexErrors {
    pub mae_pct: f64,
    pub mse_pct: f64,
    pub rmse_pct: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// `100 · trace / total`.
pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return invalid("accuracy of an empty confusion matrix");
    }
    Ok(100.0 * cm.trace() as f64 / total as f64)
}

/// One-vs-rest precision, recall and F1 per class plus their macro means.
/// An undefined ratio (zero denominator) scores 0.
pub fn precision_recall_f1(cm: &ConfusionMatrix) -> Result<(MacroScores, Vec<ClassScores>)> {
    if cm.total() == 0 {
        return invalid("scores of an empty confusion matrix");
    }
    let per_class: Vec<ClassScores> = (0..cm.num_classes())
        .map(|c| {
            let tp = cm.true_positives(c);
            let precision = ratio(tp, tp + cm.false_positives(c));
            let recall = ratio(tp, tp + cm.false_negatives(c));
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassScores { precision, recall, f1 }
        })
        .collect();
    let k = per_class.len() as f64;
    let mean = |f: fn(&ClassScores) -> f64| 100.0 * per_class.iter().map(f).sum::<f64>() / k;
    let macro_scores = MacroScores {
        precision_pct: mean(|s| s.precision),
        recall_pct: mean(|s| s.recall),
        f1_pct: mean(|s| s.f1),
    };
    Ok((macro_scores, per_class))
}

/// Error statistics on label indices, scaled by 100:
/// `mae = 100·mean|Δ|`, `mse = 100·mean Δ²`, `rmse = 100·sqrt(mean Δ²)`.
///
/// For more than two classes the distance between indices depends on the
/// arbitrary class ordering, so these numbers only make sense as a
/// reporting convention.
pub fn index_error_metrics(predicted: &[usize], actual: &[usize]) -> Result<IndexErrors> {
    if predicted.len() != actual.len() {
        return invalid(format!("{} predictions for {} labels", predicted.len(), actual.len()));
    }
    if predicted.is_empty() {
        return invalid("index error metrics need at least one sample");
    }
    let n = predicted.len() as f64;
    let (abs, sq) = predicted.iter().zip(actual).fold((0u64, 0u64), |(a, s), (&p, &t)| {
        let d = p.abs_diff(t) as u64;
        (a + d, s + d * d)
    });
    let mean_sq = sq as f64 / n;
    Ok(IndexErrors {
        mae_pct: 100.0 * (abs as f64 / n),
        mse_pct: 100.0 * mean_sq,
        rmse_pct: 100.0 * mean_sq.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cm(counts: &[&[u64]]) -> ConfusionMatrix {
        ConfusionMatrix::from_counts(counts.iter().map(|r| r.to_vec()).collect(), vec![]).unwrap()
    }

    fn r2(x: f64) -> f64 {
        (x * 100.0).round() / 100.0
    }

    #[test]
    fn resnet50v2_row() {
        let m = cm(&[&[113, 0], &[1, 110]]);
        assert_eq!(r2(accuracy(&m).unwrap()), 99.55);
        let (s, _) = precision_recall_f1(&m).unwrap();
        assert_eq!((r2(s.precision_pct), r2(s.recall_pct), r2(s.f1_pct)), (99.56, 99.55, 99.55));
    }

    #[test]
    fn macro_differs_from_micro() {
        // class 0: P = 112/113, R = 112/117; class 1: P = 106/111, R = 106/107
        let m = cm(&[&[112, 5], &[1, 106]]);
        let (s, per) = precision_recall_f1(&m).unwrap();
        let p = (112.0 / 113.0 + 106.0 / 111.0) / 2.0 * 100.0;
        let r = (112.0 / 117.0 + 106.0 / 107.0) / 2.0 * 100.0;
        assert!((s.precision_pct - p).abs() < 1e-12);
        assert!((s.recall_pct - r).abs() < 1e-12);
        assert_eq!(per.len(), 2);
        assert_eq!(r2(accuracy(&m).unwrap()), 97.32);
    }

    #[test]
    fn perfect_is_hundred() {
        let m = cm(&[&[113, 0], &[0, 111]]);
        let (s, _) = precision_recall_f1(&m).unwrap();
        assert_eq!((accuracy(&m).unwrap(), s.precision_pct, s.recall_pct, s.f1_pct), (100.0, 100.0, 100.0, 100.0));
    }

    #[test]
    fn never_predicted_class_scores_zero() {
        let m = cm(&[&[3, 0], &[2, 0]]);
        let (_, per) = precision_recall_f1(&m).unwrap();
        assert_eq!(per[1], ClassScores { precision: 0.0, recall: 0.0, f1: 0.0 });
    }

    #[test]
    fn empty_matrix_is_an_error() {
        let m = cm(&[&[0, 0], &[0, 0]]);
        assert!(accuracy(&m).is_err());
        assert!(precision_recall_f1(&m).is_err());
    }

    #[test]
    fn index_errors() {
        let mut pred = vec![0usize; 224];
        let mut act = pred.clone();
        for i in 0..6 {
            act[i] = 1;
        }
        let e = index_error_metrics(&pred, &act).unwrap();
        assert_eq!((r2(e.mae_pct), r2(e.mse_pct), r2(e.rmse_pct)), (2.68, 2.68, 16.37));
        pred.truncate(10);
        assert!(index_error_metrics(&pred, &act).is_err());
        assert!(index_error_metrics(&[], &[]).is_err());
        let z = index_error_metrics(&[1, 2], &[1, 2]).unwrap();
        assert_eq!((z.mae_pct, z.mse_pct, z.rmse_pct), (0.0, 0.0, 0.0));
    }
}
