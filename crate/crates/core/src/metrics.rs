//! Binary classification metrics with phishing as the positive class.
//!
//! ROC AUC uses the rank/pair formulation (probability that a random positive
//! outscores a random negative, ties worth 0.5), which is exact,
//! threshold-free, and equals trapezoidal integration of the ROC curve.
//! Zero-denominator precision/recall are defined as 0.

use serde::{Deserialize, Serialize};

use crate::dataset::Class;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub true_positives: usize,
    pub true_negatives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.true_positives + self.true_negatives + self.false_positives + self.false_negatives
    }
}

/// Accuracy, precision, recall and F1 derived from a confusion matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// The full per-model report: threshold metrics plus ROC AUC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub roc_auc: f64,
}

impl MetricsReport {
    pub fn from_parts(prf: Prf, roc_auc: f64) -> Self {
        Self {
            accuracy: prf.accuracy,
            precision: prf.precision,
            recall: prf.recall,
            f1: prf.f1,
            roc_auc,
        }
    }
}

/// Tabulate predictions against ground truth.
pub fn confusion(labels: &[Class], predictions: &[Class]) -> Result<ConfusionMatrix> {
    if labels.len() != predictions.len() {
        return Err(Error::Shape(format!(
            "confusion: {} labels vs {} predictions",
            labels.len(),
            predictions.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::Degenerate("confusion: empty input".into()));
    }
    let mut cm = ConfusionMatrix {
        true_positives: 0,
        true_negatives: 0,
        false_positives: 0,
        false_negatives: 0,
    };
    for (&truth, &pred) in labels.iter().zip(predictions) {
        match (truth, pred) {
            (Class::Phishing, Class::Phishing) => cm.true_positives += 1,
            (Class::Legitimate, Class::Legitimate) => cm.true_negatives += 1,
            (Class::Legitimate, Class::Phishing) => cm.false_positives += 1,
            (Class::Phishing, Class::Legitimate) => cm.false_negatives += 1,
        }
    }
    Ok(cm)
}

/// Accuracy = (TP+TN)/total, precision = TP/(TP+FP), recall = TP/(TP+FN),
/// F1 = harmonic mean of the reported precision and recall.
pub fn prf1(cm: &ConfusionMatrix) -> Prf {
    let tp = cm.true_positives as f64;
    let tn = cm.true_negatives as f64;
    let fp = cm.false_positives as f64;
    let fn_ = cm.false_negatives as f64;
    let total = tp + tn + fp + fn_;
    let accuracy = (tp + tn) / total;
    let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
    let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Prf { accuracy, precision, recall, f1 }
}

fn sorted_score_indices(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));
    idx
}

fn class_counts(labels: &[Class]) -> (usize, usize) {
    let pos = labels.iter().filter(|l| l.is_phishing()).count();
    (pos, labels.len() - pos)
}

/// ROC AUC as the Mann-Whitney statistic: the fraction of
/// (positive, negative) pairs where the positive scores strictly higher,
/// with ties counting 0.5.
pub fn roc_auc(scores: &[f64], labels: &[Class]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!(
            "roc_auc: {} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let (pos, neg) = class_counts(labels);
    if pos == 0 || neg == 0 {
        return Err(Error::Degenerate("roc_auc: needs both classes".into()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Degenerate("roc_auc: non-finite score".into()));
    }

    let order = sorted_score_indices(scores);
    let mut numerator = 0.0;
    let mut negatives_below = 0usize;
    let mut i = 0;
    while i < order.len() {
        // Walk one group of tied scores.
        let mut j = i;
        let mut pos_in_group = 0usize;
        let mut neg_in_group = 0usize;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]].is_phishing() {
                pos_in_group += 1;
            } else {
                neg_in_group += 1;
            }
            j += 1;
        }
        numerator += pos_in_group as f64 * negatives_below as f64
            + 0.5 * pos_in_group as f64 * neg_in_group as f64;
        negatives_below += neg_in_group;
        i = j;
    }
    Ok(numerator / (pos as f64 * neg as f64))
}

/// One operating point of the ROC curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    pub threshold: f64,
}

/// ROC curve swept over every distinct score threshold (descending), starting
/// at (0,0) and ending at (1,1). Trapezoidal integration of the result equals
/// [`roc_auc`].
pub fn roc_curve(scores: &[f64], labels: &[Class]) -> Result<Vec<RocPoint>> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!(
            "roc_curve: {} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let (pos, neg) = class_counts(labels);
    if pos == 0 || neg == 0 {
        return Err(Error::Degenerate("roc_curve: needs both classes".into()));
    }
    let mut order = sorted_score_indices(scores);
    order.reverse();

    let mut points = vec![RocPoint { fpr: 0.0, tpr: 0.0, threshold: f64::INFINITY }];
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        let mut j = i;
        while j < order.len() && scores[order[j]] == threshold {
            if labels[order[j]].is_phishing() {
                tp += 1;
            } else {
                fp += 1;
            }
            j += 1;
        }
        points.push(RocPoint {
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
            threshold,
        });
        i = j;
    }
    Ok(points)
}

/// Trapezoidal area under a ROC curve.
pub fn trapezoid_area(points: &[RocPoint]) -> f64 {
    points.windows(2).map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0).sum()
}
