//! Confusion matrix, one-vs-rest precision/recall/F1, macro F1 and Boost.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `counts[i * n + j]` = instances of true class `i` predicted as `j`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    n_classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn from_counts(n_classes: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != n_classes * n_classes {
            return Err(Error::shape(
                format!("{} counts", n_classes * n_classes),
                format!("{} counts", counts.len()),
            ));
        }
        Ok(Self { n_classes, counts })
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn get(&self, actual: usize, predicted: usize) -> u64 {
        self.counts[actual * self.n_classes + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn true_positives(&self, class: usize) -> u64 {
        self.get(class, class)
    }

    pub fn false_positives(&self, class: usize) -> u64 {
        (0..self.n_classes)
            .filter(|&i| i != class)
            .map(|i| self.get(i, class))
            .sum()
    }

    pub fn false_negatives(&self, class: usize) -> u64 {
        (0..self.n_classes)
            .filter(|&j| j != class)
            .map(|j| self.get(class, j))
            .sum()
    }
}

pub fn confusion(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::shape(
            format!("{} predictions", y_true.len()),
            format!("{} predictions", y_pred.len()),
        ));
    }
    let mut counts = vec![0u64; n_classes * n_classes];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        for label in [t, p] {
            if label >= n_classes {
                return Err(Error::LabelOutOfRange { label, n_classes });
            }
        }
        counts[t * n_classes + p] += 1;
    }
    Ok(ConfusionMatrix { n_classes, counts })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
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

/// One-vs-rest scores per class; every vanishing denominator yields 0.
pub fn per_class_scores(cm: &ConfusionMatrix) -> Vec<ClassScores> {
    (0..cm.n_classes())
        .map(|k| {
            let tp = cm.true_positives(k);
            let precision = ratio(tp, tp + cm.false_positives(k));
            let recall = ratio(tp, tp + cm.false_negatives(k));
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassScores {
                precision,
                recall,
                f1,
            }
        })
        .collect()
}

/// Unweighted mean of per-class F1 over all declared classes.
pub fn macro_f1(cm: &ConfusionMatrix) -> Result<f64> {
    if cm.total() == 0 || cm.n_classes() == 0 {
        return Err(Error::EmptyMatrix);
    }
    let scores = per_class_scores(cm);
    Ok(scores.iter().map(|s| s.f1).sum::<f64>() / scores.len() as f64)
}

/// Convenience: macro F1 straight from label vectors.
pub fn macro_f1_score(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> Result<f64> {
    macro_f1(&confusion(y_true, y_pred, n_classes)?)
}

/// Relative improvement of the hybrid over the baseline, in percent.
pub fn boost(f1_hybrid: f64, f1_baseline: f64) -> Result<f64> {
    if f1_baseline.is_nan() || f1_baseline <= 0.0 {
        return Err(Error::ZeroBaseline(f1_baseline));
    }
    Ok((f1_hybrid - f1_baseline) / f1_baseline * 100.0)
}
