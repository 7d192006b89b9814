//! Confusion matrices and macro-averaged precision, recall and F1.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Tag;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("gold has {gold} labels but predictions have {pred}")]
    LengthMismatch { gold: usize, pred: usize },
    #[error("nothing to evaluate")]
    Empty,
}

/// 3x3 counts, rows = gold tag, columns = predicted tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub cells: [[usize; 3]; 3],
}

impl ConfusionMatrix {
    pub fn get(&self, gold: Tag, pred: Tag) -> usize {
        self.cells[gold.index()][pred.index()]
    }

    pub fn total(&self) -> usize {
        self.cells.iter().flatten().sum()
    }

    pub fn trace(&self) -> usize {
        (0..3).map(|i| self.cells[i][i]).sum()
    }

    pub fn gold_count(&self, tag: Tag) -> usize {
        self.cells[tag.index()].iter().sum()
    }

    pub fn predicted_count(&self, tag: Tag) -> usize {
        self.cells.iter().map(|row| row[tag.index()]).sum()
    }
}

pub fn confusion(gold: &[Tag], pred: &[Tag]) -> Result<ConfusionMatrix, EvalError> {
    if gold.len() != pred.len() {
        return Err(EvalError::LengthMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    if gold.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut matrix = ConfusionMatrix::default();
    for (g, p) in gold.iter().zip(pred) {
        matrix.cells[g.index()][p.index()] += 1;
    }
    Ok(matrix)
}

/// Metrics of one class. `None` means the class never occurs in gold or
/// predictions, so it is left out of the macro mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub support: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub model: String,
    /// Indexed by [`Tag::index`].
    pub per_class: [ClassMetrics; 3],
    pub macro_avg: Averages,
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
}

/// A non-negative fraction; `x/0` counts as `0/1`.
#[derive(Debug, Clone, Copy)]
struct Ratio {
    num: u128,
    den: u128,
}

fn gcd(a: u128, b: u128) -> u128 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl Ratio {
    fn new(num: usize, den: usize) -> Self {
        if den == 0 {
            Ratio { num: 0, den: 1 }
        } else {
            Ratio {
                num: num as u128,
                den: den as u128,
            }
        }
    }

    fn value(self) -> f64 {
        let d = gcd(self.num, self.den).max(1);
        (self.num / d) as f64 / (self.den / d) as f64
    }
}

/// Mean of fractions summed exactly, so that e.g. the mean of 2/3, 2/3
/// and 1 is the double nearest to 7/9 rather than one ulp below it.
fn exact_mean(parts: &[Ratio]) -> f64 {
    let (mut num, mut den) = (0u128, 1u128);
    for p in parts {
        num = num * p.den + p.num * den;
        den *= p.den;
        let d = gcd(num, den).max(1);
        num /= d;
        den /= d;
    }
    Ratio {
        num,
        den: den * parts.len() as u128,
    }
    .value()
}

pub fn metrics(matrix: &ConfusionMatrix) -> Result<EvalReport, EvalError> {
    let total = matrix.total();
    if total == 0 {
        return Err(EvalError::Empty);
    }
    let mut per_class = [ClassMetrics {
        precision: None,
        recall: None,
        f1: None,
        support: 0,
    }; 3];
    let (mut ps, mut rs, mut fs) = (Vec::new(), Vec::new(), Vec::new());
    for tag in Tag::ALL {
        let tp = matrix.get(tag, tag);
        let gold = matrix.gold_count(tag);
        let predicted = matrix.predicted_count(tag);
        let slot = &mut per_class[tag.index()];
        slot.support = gold;
        if gold == 0 && predicted == 0 {
            continue;
        }
        let precision = Ratio::new(tp, predicted);
        let recall = Ratio::new(tp, gold);
        // Harmonic mean of P and R, as one fraction.
        let f1 = Ratio::new(2 * tp, gold + predicted);
        slot.precision = Some(precision.value());
        slot.recall = Some(recall.value());
        slot.f1 = Some(f1.value());
        ps.push(precision);
        rs.push(recall);
        fs.push(f1);
    }
    Ok(EvalReport {
        model: String::new(),
        per_class,
        macro_avg: Averages {
            precision: exact_mean(&ps),
            recall: exact_mean(&rs),
            f1: exact_mean(&fs),
        },
        accuracy: Ratio::new(matrix.trace(), total).value(),
        confusion: *matrix,
    })
}

/// Convenience: confusion + metrics in one call.
pub fn evaluate(model: &str, gold: &[Tag], pred: &[Tag]) -> Result<EvalReport, EvalError> {
    let mut report = metrics(&confusion(gold, pred)?)?;
    report.model = model.to_string();
    Ok(report)
}

impl EvalReport {
    pub fn class(&self, tag: Tag) -> &ClassMetrics {
        &self.per_class[tag.index()]
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut per_class = serde_json::Map::new();
        for tag in Tag::ALL {
            per_class.insert(
                tag.to_string(),
                serde_json::to_value(self.class(tag)).expect("class metrics serialize"),
            );
        }
        serde_json::json!({
            "model": self.model,
            "per_class": per_class,
            "macro": self.macro_avg,
            "accuracy": self.accuracy,
            "confusion": self.confusion.cells,
        })
    }

    pub fn from_json(value: &serde_json::Value) -> Option<EvalReport> {
        let model = value.get("model")?.as_str()?.to_string();
        let mut per_class = [ClassMetrics {
            precision: None,
            recall: None,
            f1: None,
            support: 0,
        }; 3];
        for tag in Tag::ALL {
            per_class[tag.index()] =
                serde_json::from_value(value.get("per_class")?.get(tag.as_str())?.clone()).ok()?;
        }
        Some(EvalReport {
            model,
            per_class,
            macro_avg: serde_json::from_value(value.get("macro")?.clone()).ok()?,
            accuracy: value.get("accuracy")?.as_f64()?,
            confusion: ConfusionMatrix {
                cells: serde_json::from_value(value.get("confusion")?.clone()).ok()?,
            },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportStyle {
    #[default]
    Text,
    Json,
}

/// Renders one row per model. Text uses two decimals; JSON keeps every digit.
pub fn format_report(reports: &[EvalReport], style: ReportStyle) -> String {
    match style {
        ReportStyle::Json => {
            let values: Vec<_> = reports.iter().map(EvalReport::to_json).collect();
            serde_json::to_string_pretty(&values).expect("json values serialize")
        }
        ReportStyle::Text => {
            let width = reports
                .iter()
                .map(|r| r.model.chars().count())
                .max()
                .unwrap_or(0)
                .max("Model".len());
            let mut out = format!("{:<width$}  Precision  Recall  F1-score\n", "Model");
            for report in reports {
                let _ = writeln!(
                    out,
                    "{:<width$}  {:>9.2}  {:>6.2}  {:>8.2}",
                    report.model,
                    report.macro_avg.precision,
                    report.macro_avg.recall,
                    report.macro_avg.f1
                );
            }
            out
        }
    }
}
