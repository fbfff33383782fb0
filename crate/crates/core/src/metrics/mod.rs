//! Confusion matrices, per-class precision / sensitivity / F1, one-vs-rest
//! ROC curves with trapezoidal AUC, and CSV writers for all of them.

mod confusion;
mod csv;
mod roc;

use thiserror::Error;

pub use confusion::{class_metrics, confusion, ClassMetrics, ConfusionMatrix, PerClass};
pub use csv::{write_class_metrics, write_confusion_counts, write_confusion_probabilities, write_roc, write_summary, SummaryRow};
pub use roc::{auc_grade, roc_auc, AucGrade, RocCurve, RocPoint};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("{actual} actual labels but {predicted} predictions")]
    LengthMismatch { actual: usize, predicted: usize },
    #[error("class index {index} out of range for {n_classes} classes")]
    ClassOutOfRange { index: usize, n_classes: usize },
    #[error("AUC undefined for class {class}: {positives} positives, {negatives} negatives")]
    UndefinedAuc { class: usize, positives: usize, negatives: usize },
}
