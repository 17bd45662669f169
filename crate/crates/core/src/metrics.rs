//! Weighted/unweighted accuracy, per-class precision/recall/F1 and
//! confusion matrices.
//!
//! WA is overall accuracy (trace / total). UA is the unweighted mean of
//! per-class recall over classes that have at least one true sample.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{param_err, Result};

/// Rows are true classes, columns predicted classes.
pub type Confusion = Vec<Vec<u64>>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Number of true samples of the class.
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub confusion: Confusion,
    pub total: u64,
    pub wa: f64,
    pub ua: f64,
    pub per_class: Vec<ClassScores>,
    /// Support-weighted averages of precision, recall and F1.
    pub weighted_avg: ClassScores,
    /// Classes never predicted; their precision is reported as 0.
    pub empty_prediction_classes: Vec<usize>,
    /// Classes with no true samples; left out of UA.
    pub excluded_from_ua: Vec<usize>,
}

pub fn confusion_matrix(true_labels: &[usize], predicted: &[usize], classes: usize) -> Result<Confusion> {
    if true_labels.len() != predicted.len() {
        return Err(param_err(format!(
            "label count mismatch: {} true vs {} predicted",
            true_labels.len(),
            predicted.len()
        )));
    }
    let mut m = vec![vec![0u64; classes]; classes];
    for (&t, &p) in true_labels.iter().zip(predicted) {
        if t >= classes || p >= classes {
            return Err(param_err(format!(
                "label out of range: ({t}, {p}) with {classes} classes"
            )));
        }
        m[t][p] += 1;
    }
    Ok(m)
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

pub fn compute_report(confusion: &Confusion) -> Result<MetricsReport> {
    let n = confusion.len();
    if n == 0 || confusion.iter().any(|r| r.len() != n) {
        return Err(param_err("confusion matrix must be square and nonempty"));
    }
    let total: u64 = confusion.iter().flatten().sum();
    if total == 0 {
        return Err(param_err("confusion matrix has no samples"));
    }
    let trace: u64 = (0..n).map(|i| confusion[i][i]).sum();

    let mut per_class = Vec::with_capacity(n);
    let mut empty_prediction_classes = Vec::new();
    let mut excluded_from_ua = Vec::new();
    for c in 0..n {
        let support: u64 = confusion[c].iter().sum();
        let predicted: u64 = (0..n).map(|r| confusion[r][c]).sum();
        let hit = confusion[c][c] as f64;
        let precision = if predicted > 0 {
            hit / predicted as f64
        } else {
            empty_prediction_classes.push(c);
            0.0
        };
        let recall = if support > 0 {
            hit / support as f64
        } else {
            excluded_from_ua.push(c);
            0.0
        };
        per_class.push(ClassScores {
            precision,
            recall,
            f1: harmonic(precision, recall),
            support,
        });
    }
    if !excluded_from_ua.is_empty() {
        warn!("classes {excluded_from_ua:?} have no true samples and are excluded from UA");
    }

    let counted: Vec<&ClassScores> = per_class.iter().filter(|s| s.support > 0).collect();
    let ua = counted.iter().map(|s| s.recall).sum::<f64>() / counted.len() as f64;
    let weight =
        |f: fn(&ClassScores) -> f64| per_class.iter().map(|s| f(s) * s.support as f64).sum::<f64>() / total as f64;
    let weighted_avg = ClassScores {
        precision: weight(|s| s.precision),
        // support-weighted recall is exactly trace / total
        recall: trace as f64 / total as f64,
        f1: weight(|s| s.f1),
        support: total,
    };

    Ok(MetricsReport {
        confusion: confusion.clone(),
        total,
        wa: trace as f64 / total as f64,
        ua,
        per_class,
        weighted_avg,
        empty_prediction_classes,
        excluded_from_ua,
    })
}

/// Confusion matrix as CSV: a header of predicted-class columns, then one
/// row per true class.
pub fn confusion_csv(confusion: &Confusion) -> String {
    let n = confusion.len();
    let mut out = String::from("true\\pred");
    for c in 0..n {
        out.push_str(&format!(",{c}"));
    }
    out.push('\n');
    for (i, row) in confusion.iter().enumerate() {
        out.push_str(&i.to_string());
        for v in row {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}
