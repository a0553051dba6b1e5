//! Binary classification metrics with class 1 as the positive class.

use crate::{LearnError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn confusion(y_true: &[usize], y_pred: &[usize]) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(LearnError::Length(y_true.len(), y_pred.len()));
    }
    let mut cm = ConfusionMatrix::default();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t, p) {
            (1, 1) => cm.tp += 1,
            (0, 0) => cm.tn += 1,
            (0, 1) => cm.fp += 1,
            (1, 0) => cm.fn_ += 1,
            _ => return Err(LearnError::Label(t.max(p))),
        }
    }
    Ok(cm)
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Harmonic mean of precision and recall, 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

pub fn metrics(cm: &ConfusionMatrix) -> Metrics {
    let precision = ratio(cm.tp, cm.tp + cm.fp);
    let recall = ratio(cm.tp, cm.tp + cm.fn_);
    Metrics {
        accuracy: ratio(cm.tp + cm.tn, cm.total()),
        precision,
        recall,
        f1: f1_score(precision, recall),
    }
}
