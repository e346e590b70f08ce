//! Binary classification metrics for one positive symbol.

use anyhow::{bail, Result};
use mtd_core::Sample;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfusionMetrics {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub accuracy: f64,
    pub precision: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub f1: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl ConfusionMetrics {
    /// Metrics from counts. A metric whose denominator is zero is 0.
    pub fn from_counts(tp: u64, tn: u64, fp: u64, fn_: u64) -> Self {
        // 2·PPV·Recall/(PPV + Recall) reduces to 2TP/(2TP + FP + FN)
        Self {
            tp,
            tn,
            fp,
            fn_,
            accuracy: ratio(tp + tn, tp + tn + fp + fn_),
            precision: ratio(tp, tp + fp),
            sensitivity: ratio(tp, tp + fn_),
            specificity: ratio(tn, tn + fp),
            f1: if tp == 0 { 0.0 } else { ratio(2 * tp, 2 * tp + fp + fn_) },
        }
    }
}

/// Compares predictions with observations, `positive` being the target
/// symbol label.
pub fn classification_metrics(predicted: &Sample, actual: &Sample, positive: &str) -> Result<ConfusionMetrics> {
    if predicted.len() != actual.len() {
        bail!("predicted has {} symbols, actual has {}", predicted.len(), actual.len());
    }
    let (mut tp, mut tn, mut fp, mut fn_) = (0, 0, 0, 0);
    for (p, a) in predicted.labels().zip(actual.labels()) {
        match (p == positive, a == positive) {
            (true, true) => tp += 1,
            (false, false) => tn += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
        }
    }
    Ok(ConfusionMetrics::from_counts(tp, tn, fp, fn_))
}
