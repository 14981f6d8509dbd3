use std::path::Path;

use serde::{Deserialize, Serialize, Serializer};

use super::confusion::ConfusionMatrix;
use super::scores::{accuracy, precision_recall_f1};
use crate::error::{invalid, Error, Result};

/// Half-away-from-zero rounding to two decimals.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn ser_round2<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(round2(*x))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassReport {
    pub class: String,
    #[serde(serialize_with = "ser_round2")]
    pub precision_pct: f64,
    #[serde(serialize_with = "ser_round2")]
    pub recall_pct: f64,
    #[serde(serialize_with = "ser_round2")]
    pub f1_pct: f64,
}

/// One row of the evaluation table. Values are kept at full precision and
/// rounded to two decimals only when serialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsReport {
    #[serde(serialize_with = "ser_round2")]
    pub accuracy_pct: f64,
    #[serde(serialize_with = "ser_round2")]
    pub precision_pct: f64,
    #[serde(serialize_with = "ser_round2")]
    pub recall_pct: f64,
    #[serde(serialize_with = "ser_round2")]
    pub f1_pct: f64,
    #[serde(serialize_with = "ser_round2")]
    pub mae_pct: f64,
    #[serde(serialize_with = "ser_round2")]
    pub mse_pct: f64,
    #[serde(serialize_with = "ser_round2")]
    pub rmse_pct: f64,
    pub n: u64,
    /// Wall-clock prediction time; `null` when the report was not produced
    /// by a timed prediction run.
    pub prediction_seconds: Option<f64>,
    pub class_names: Vec<String>,
    /// `confusion[actual][predicted]`.
    pub confusion: Vec<Vec<u64>>,
    pub per_class: Vec<ClassReport>,
}

impl MetricsReport {
    /// Derives every score from the matrix. Index errors use the row and
    /// column indices of each cell as `actual` and `predicted`.
    pub fn from_confusion(cm: &ConfusionMatrix, prediction_seconds: Option<f64>) -> Result<Self> {
        let accuracy_pct = accuracy(cm)?;
        let (macro_scores, per) = precision_recall_f1(cm)?;
        let n = cm.total();
        let (mut abs, mut sq) = (0u64, 0u64);
        for (a, row) in cm.counts().iter().enumerate() {
            for (p, &count) in row.iter().enumerate() {
                let d = a.abs_diff(p) as u64;
                abs += count * d;
                sq += count * d * d;
            }
        }
        let mean_sq = sq as f64 / n as f64;
        Ok(MetricsReport {
            accuracy_pct,
            precision_pct: macro_scores.precision_pct,
            recall_pct: macro_scores.recall_pct,
            f1_pct: macro_scores.f1_pct,
            mae_pct: 100.0 * (abs as f64 / n as f64),
            mse_pct: 100.0 * mean_sq,
            rmse_pct: 100.0 * mean_sq.sqrt(),
            n,
            prediction_seconds,
            class_names: cm.class_names().to_vec(),
            confusion: cm.counts().to_vec(),
            per_class: per
                .iter()
                .zip(cm.class_names())
                .map(|(s, name)| ClassReport {
                    class: name.clone(),
                    precision_pct: 100.0 * s.precision,
                    recall_pct: 100.0 * s.recall,
                    f1_pct: 100.0 * s.f1,
                })
                .collect(),
        })
    }

    pub fn confusion_matrix(&self) -> Result<ConfusionMatrix> {
        ConfusionMatrix::from_counts(self.confusion.clone(), self.class_names.clone())
    }
}

/// Pretty-printed JSON with a trailing newline.
pub fn report_json(r: &MetricsReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(r)?;
    s.push('\n');
    Ok(s)
}

pub fn write_report(r: &MetricsReport, path: &Path) -> Result<()> {
    std::fs::write(path, report_json(r)?).map_err(|e| Error::io(path, e))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Data(e.to_string())
}

/// Header `actual\predicted,<names>`, then one row per actual class.
pub fn confusion_csv(cm: &ConfusionMatrix) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let mut header = vec!["actual\\predicted".to_string()];
    header.extend(cm.class_names().iter().cloned());
    w.write_record(&header).map_err(csv_err)?;
    for (name, row) in cm.class_names().iter().zip(cm.counts()) {
        let mut rec = vec![name.clone()];
        rec.extend(row.iter().map(u64::to_string));
        w.write_record(&rec).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Data(e.to_string()))
}

pub fn write_confusion_csv(cm: &ConfusionMatrix, path: &Path) -> Result<()> {
    std::fs::write(path, confusion_csv(cm)?).map_err(|e| Error::io(path, e))
}

pub fn parse_confusion_csv(text: &str) -> Result<ConfusionMatrix> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = r.headers().map_err(csv_err)?.clone();
    if header.get(0) != Some("actual\\predicted") {
        return Err(Error::Data("confusion CSV must start with actual\\predicted".into()));
    }
    let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut counts = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        if rec.get(0) != names.get(i).map(String::as_str) {
            return Err(Error::Data(format!("row {} label does not match column order", i + 1)));
        }
        let row = rec
            .iter()
            .skip(1)
            .map(|c| c.parse::<u64>().map_err(|e| Error::Data(format!("row {}: {e}", i + 1))))
            .collect::<Result<Vec<_>>>()?;
        counts.push(row);
    }
    ConfusionMatrix::from_counts(counts, names)
}

/// Parses `predicted,actual` rows of integer labels.
pub fn read_predictions_csv(text: &str) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(csv_err)?;
    if header.iter().collect::<Vec<_>>() != ["predicted", "actual"] {
        return Err(Error::Data(format!("predictions CSV header must be predicted,actual, got {header:?}")));
    }
    let (mut predicted, mut actual) = (Vec::new(), Vec::new());
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let field = |j: usize| -> Result<usize> {
            rec.get(j)
                .unwrap_or_default()
                .trim()
                .parse()
                .map_err(|e| Error::Data(format!("predictions row {}: {e}", i + 1)))
        };
        predicted.push(field(0)?);
        actual.push(field(1)?);
    }
    if predicted.is_empty() {
        return invalid("predictions CSV has no rows");
    }
    Ok((predicted, actual))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> ConfusionMatrix {
        ConfusionMatrix::from_counts(vec![vec![113, 0], vec![1, 110]], vec!["covid".into(), "normal".into()])
            .unwrap()
    }

    #[test]
    fn rounding_is_half_away() {
        assert_eq!(round2(2.675000001), 2.68);
        assert_eq!(round2(-1.005000001), -1.01);
        assert_eq!(round2(99.549), 99.55);
    }

    #[test]
    fn json_fields_and_stability() {
        let r = MetricsReport::from_confusion(&fixture(), Some(0.5)).unwrap();
        let text = report_json(&r).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["accuracy_pct"], 99.55);
        assert_eq!(v["precision_pct"], 99.56);
        let total: u64 = v["confusion"].as_array().unwrap().iter().flat_map(|r| r.as_array().unwrap()).map(|c| c.as_u64().unwrap()).sum();
        assert_eq!(total, v["n"].as_u64().unwrap());
        let back: MetricsReport = serde_json::from_str(&text).unwrap();
        assert_eq!(report_json(&back).unwrap(), text);
    }

    #[test]
    fn confusion_csv_round_trip() {
        let cm = fixture();
        let text = confusion_csv(&cm).unwrap();
        assert_eq!(text, "actual\\predicted,covid,normal\ncovid,113,0\nnormal,1,110\n");
        assert_eq!(parse_confusion_csv(&text).unwrap(), cm);
    }

    #[test]
    fn predictions_csv() {
        let (p, a) = read_predictions_csv("predicted,actual\n0,1\n1,1\n").unwrap();
        assert_eq!((p, a), (vec![0, 1], vec![1, 1]));
        assert!(read_predictions_csv("actual,predicted\n0,1\n").is_err());
        assert!(read_predictions_csv("predicted,actual\nx,1\n").is_err());
    }
}
