//! Confusion matrix, classification scores and report writers.

mod confusion;
mod report;
mod scores;

pub use confusion::{confusion_matrix, ConfusionMatrix};
pub use report::{
    confusion_csv, parse_confusion_csv, read_predictions_csv, report_json, round2, write_confusion_csv,
    write_report, ClassReport, MetricsReport,
};
pub use scores::{accuracy, index_error_metrics, precision_recall_f1, ClassScores, IndexErrors, MacroScores};
