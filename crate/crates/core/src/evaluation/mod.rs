//! Confusion counting, the four headline metrics, cross-validation and report
//! rendering. Correct pronunciation is the positive class.

mod cv;
mod report;

pub use cv::{cross_validate, cross_validate_vectors, evaluate_vectors, CvOutcome, FoldResult};
pub use report::{render_report, render_to_string, report_file_name, EvalReport, ModelEvaluation, PerClassMetrics, ReportFormat, REPORT_VERSION};

use serde::{Deserialize, Serialize};

use crate::dataset::Label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn record(&mut self, predicted: Label, actual: Label) {
        match (predicted, actual) {
            (Label::Correct, Label::Correct) => self.tp += 1,
            (Label::Incorrect, Label::Incorrect) => self.tn += 1,
            (Label::Correct, Label::Incorrect) => self.fp += 1,
            (Label::Incorrect, Label::Correct) => self.fn_ += 1,
        }
    }

    /// The same counts with Incorrect taken as the positive class.
    pub fn swapped(&self) -> Self {
        Self {
            tp: self.tn,
            tn: self.tp,
            fp: self.fn_,
            fn_: self.fp,
        }
    }

    pub fn merge(&self, other: &Self) -> Self {
        Self {
            tp: self.tp + other.tp,
            tn: self.tn + other.tn,
            fp: self.fp + other.fp,
            fn_: self.fn_ + other.fn_,
        }
    }

    pub fn metrics(&self) -> Metrics {
        metrics(self)
    }
}

/// Counts `(predicted, actual)` pairs.
pub fn confusion(pairs: &[(Label, Label)]) -> Result<ConfusionMatrix> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut cm = ConfusionMatrix::default();
    for &(p, a) in pairs {
        cm.record(p, a);
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Accuracy, precision, recall and F1. Any ratio with a zero denominator is 0.
pub fn metrics(cm: &ConfusionMatrix) -> Metrics {
    let accuracy = ratio(cm.tp + cm.tn, cm.total());
    let precision = ratio(cm.tp, cm.tp + cm.fp);
    let recall = ratio(cm.tp, cm.tp + cm.fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Metrics {
        accuracy,
        precision,
        recall,
        f1,
    }
}
