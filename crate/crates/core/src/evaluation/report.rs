use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{ConfusionMatrix, CvOutcome, FoldResult, Metrics};
use crate::classifiers::{ModelKind, ModelParams};
use crate::error::{Error, Result};
use crate::fsutil::atomic_write;

pub const REPORT_VERSION: u32 = 1;

const ZERO_POLICY: &str = "ratios with a zero denominator are reported as 0";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerClassMetrics {
    pub correct: Metrics,
    pub incorrect: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEvaluation {
    pub model: ModelKind,
    pub params: ModelParams,
    pub folds_k: usize,
    pub seed: u64,
    /// Pooled over all held-out predictions, Correct as positive.
    pub confusion: ConfusionMatrix,
    pub metrics: Metrics,
    pub per_class: PerClassMetrics,
    pub fold_accuracy_mean: f64,
    pub fold_accuracy_std: f64,
    pub folds: Vec<FoldResult>,
}

impl ModelEvaluation {
    pub fn from_outcome(params: &ModelParams, k: usize, seed: u64, out: &CvOutcome) -> Self {
        let (mean, std) = out.fold_accuracy_mean_std();
        Self {
            model: params.kind(),
            params: *params,
            folds_k: k,
            seed,
            confusion: out.pooled,
            metrics: out.pooled.metrics(),
            per_class: PerClassMetrics {
                correct: out.pooled.metrics(),
                incorrect: out.pooled.swapped().metrics(),
            },
            fold_accuracy_mean: mean,
            fold_accuracy_std: std,
            folds: out.folds.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub version: u32,
    pub dataset: String,
    pub positive_class: String,
    pub zero_denominator_policy: String,
    pub models: Vec<ModelEvaluation>,
}

impl EvalReport {
    pub fn new(dataset: impl Into<String>, models: Vec<ModelEvaluation>) -> Self {
        Self {
            version: REPORT_VERSION,
            dataset: dataset.into(),
            positive_class: "correct".into(),
            zero_denominator_policy: ZERO_POLICY.into(),
            models,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: Self = serde_json::from_str(text).map_err(|e| Error::ParseError(e.to_string()))?;
        if report.version != REPORT_VERSION {
            return Err(Error::VersionMismatch {
                found: report.version,
                expected: REPORT_VERSION,
            });
        }
        Ok(report)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Markdown,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Json => "json",
            ReportFormat::Csv => "csv",
            ReportFormat::Markdown => "md",
        }
    }

    pub fn from_path(path: &Path) -> Option<Self> {
        path.extension()?.to_str()?.parse().ok()
    }
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            other => Err(Error::InvalidParameter(format!("unknown report format {other:?}"))),
        }
    }
}

fn pct(v: f64) -> String {
    format!("{:.2}%", 100.0 * v)
}

fn metric_cells(m: &Metrics) -> String {
    format!(
        "{} | {} | {} | {}",
        pct(m.precision),
        pct(m.recall),
        pct(m.f1),
        pct(m.accuracy)
    )
}

fn markdown(r: &EvalReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# Evaluation report: {}\n", r.dataset);
    let _ = writeln!(s, "| Model | Precision | Recall | F1-Score | Accuracy |");
    let _ = writeln!(s, "|---|---|---|---|---|");
    for m in &r.models {
        let _ = writeln!(s, "| {} | {} |", m.model.display_name(), metric_cells(&m.metrics));
    }
    let _ = writeln!(s, "\nPositive class: {}. Note: {}.", r.positive_class, r.zero_denominator_policy);
    for m in &r.models {
        let _ = writeln!(s, "\n## {} ({})\n", m.model.display_name(), m.params);
        let _ = writeln!(
            s,
            "{}-fold cross-validation, seed {}. Fold accuracy {} ± {}.\n",
            m.folds_k,
            m.seed,
            pct(m.fold_accuracy_mean),
            pct(m.fold_accuracy_std)
        );
        let _ = writeln!(s, "| Class | Precision | Recall | F1-Score | Accuracy |");
        let _ = writeln!(s, "|---|---|---|---|---|");
        let _ = writeln!(s, "| correct | {} |", metric_cells(&m.per_class.correct));
        let _ = writeln!(s, "| incorrect | {} |", metric_cells(&m.per_class.incorrect));
        let c = &m.confusion;
        let _ = writeln!(s, "\n| | predicted correct | predicted incorrect |");
        let _ = writeln!(s, "|---|---|---|");
        let _ = writeln!(s, "| actual correct | {} | {} |", c.tp, c.fn_);
        let _ = writeln!(s, "| actual incorrect | {} | {} |", c.fp, c.tn);
    }
    s
}

fn csv_row(s: &mut String, model: &str, fold: &str, n: u64, m: &Metrics, c: &ConfusionMatrix) {
    let _ = writeln!(
        s,
        "{model},{fold},{n},{},{},{},{},{},{},{},{}",
        m.accuracy, m.precision, m.recall, m.f1, c.tp, c.tn, c.fp, c.fn_
    );
}

fn csv(r: &EvalReport) -> String {
    let mut s = String::from("model,fold,n,accuracy,precision,recall,f1,tp,tn,fp,fn\n");
    for m in &r.models {
        for f in &m.folds {
            csv_row(&mut s, m.model.as_str(), &f.fold.to_string(), f.n as u64, &f.metrics, &f.confusion);
        }
        csv_row(&mut s, m.model.as_str(), "all", m.confusion.total(), &m.metrics, &m.confusion);
    }
    s
}

pub fn render_to_string(report: &EvalReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => serde_json::to_string_pretty(report).expect("report serializes"),
        ReportFormat::Csv => csv(report),
        ReportFormat::Markdown => markdown(report),
    }
}

pub fn render_report(report: &EvalReport, format: ReportFormat, path: impl AsRef<Path>) -> Result<()> {
    atomic_write(path.as_ref(), render_to_string(report, format).as_bytes())
}

/// `report-{dataset}-{model}-{timestamp}.{ext}`
pub fn report_file_name(dataset: &str, model: &str, timestamp: &str, format: ReportFormat) -> String {
    format!("report-{dataset}-{model}-{timestamp}.{}", format.extension())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(metrics: Metrics, folds: Vec<FoldResult>) -> ModelEvaluation {
        let cm = ConfusionMatrix { tp: 40, tn: 45, fp: 5, fn_: 10 };
        ModelEvaluation {
            model: ModelKind::Knn,
            params: ModelParams::Knn { k: 5 },
            folds_k: 10,
            seed: 42,
            confusion: cm,
            metrics,
            per_class: PerClassMetrics {
                correct: metrics,
                incorrect: cm.swapped().metrics(),
            },
            fold_accuracy_mean: 0.1 + 0.2,
            fold_accuracy_std: 1.0 / 3.0,
            folds,
        }
    }

    #[test]
    fn markdown_cells() {
        let m = Metrics { precision: 0.939, recall: 0.9484, f1: 0.9436, accuracy: 0.9433 };
        let md = render_to_string(&EvalReport::new("d", vec![eval(m, vec![])]), ReportFormat::Markdown);
        assert!(md.contains("| Precision | Recall | F1-Score | Accuracy |"));
        assert!(md.contains("93.90% | 94.84% | 94.36% | 94.33%"), "{md}");
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let m = Metrics { precision: 0.1 + 0.2, recall: 2.0f64.sqrt() / 3.0, f1: 1e-300, accuracy: 0.7 };
        let fold = FoldResult { fold: 0, n: 10, confusion: ConfusionMatrix::default(), metrics: m };
        let r = EvalReport::new("synthetic", vec![eval(m, vec![fold])]);
        let back = EvalReport::from_json(&render_to_string(&r, ReportFormat::Json)).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.models[0].metrics.recall.to_bits(), m.recall.to_bits());
    }

    #[test]
    fn empty_breakdown_csv() {
        let r = EvalReport::new("d", vec![eval(Metrics::default(), vec![])]);
        let text = render_to_string(&r, ReportFormat::Csv);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], "model,fold,n,accuracy,precision,recall,f1,tp,tn,fp,fn");
        assert!(lines[1].starts_with("knn,all,100,"));
    }

    #[test]
    fn file_naming() {
        assert_eq!(
            report_file_name("synth", "knn", "20240101T000000Z", ReportFormat::Markdown),
            "report-synth-knn-20240101T000000Z.md"
        );
        assert_eq!(ReportFormat::from_path(Path::new("a/b.csv")), Some(ReportFormat::Csv));
    }
}
