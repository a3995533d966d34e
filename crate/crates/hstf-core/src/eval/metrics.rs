//! Point metrics (P/R/F-beta/FPR/TPR) and the ROC sweep.

use serde::{Deserialize, Serialize};

use crate::error::{HstfError, Result};
use crate::flow::Label;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PointMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f_beta: f64,
    pub beta: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// F-beta from precision and recall: (1+b^2) P R / (b^2 P + R).
pub fn f_beta(precision: f64, recall: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let denom = b2 * precision + recall;
    if denom == 0.0 {
        0.0
    } else {
        (1.0 + b2) * precision * recall / denom
    }
}

/// FPR inferred from P and R; only valid on a 1:1 test ratio.
pub fn fpr_from_pr(precision: f64, recall: f64) -> f64 {
    if precision == 0.0 {
        0.0
    } else {
        recall * (1.0 - precision) / precision
    }
}

/// Point metrics from confusion counts. A test set without positive
/// samples leaves recall undefined and is fatal.
pub fn compute_metrics(counts: &ConfusionCounts, beta: f64) -> Result<PointMetrics> {
    if counts.total() == 0 {
        return Err(HstfError::EmptySplit("test"));
    }
    if counts.tp + counts.fn_ == 0 {
        return Err(HstfError::SingleClass);
    }
    let precision = if counts.tp + counts.fp == 0 {
        0.0
    } else {
        counts.tp as f64 / (counts.tp + counts.fp) as f64
    };
    let recall = counts.tp as f64 / (counts.tp + counts.fn_) as f64;
    let fpr = if counts.tn + counts.fp == 0 {
        0.0
    } else {
        counts.fp as f64 / (counts.tn + counts.fp) as f64
    };
    Ok(PointMetrics {
        precision,
        recall,
        f_beta: f_beta(precision, recall, beta),
        beta,
        fpr,
        tpr: recall,
    })
}

/// Count a prediction list at a threshold; malicious iff score > lambda.
pub fn confusion_at(predictions: &[(f64, Label)], lambda: f64) -> ConfusionCounts {
    let mut c = ConfusionCounts::default();
    for &(score, label) in predictions {
        let predicted_mal = score > lambda;
        match (predicted_mal, label == Label::Malicious) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    c
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// Sweep thresholds over the sorted unique scores (the staircase from
/// (0,0) at lambda=1 to (1,1) at lambda=0) and integrate AUC by
/// trapezoid. `max_points` 0 keeps every distinct score; otherwise the
/// curve is thinned evenly for reporting.
pub fn roc_sweep(predictions: &[(f64, Label)], max_points: usize) -> Result<RocCurve> {
    let pos = predictions.iter().filter(|(_, l)| *l == Label::Malicious).count();
    let neg = predictions.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(HstfError::SingleClass);
    }

    let mut sorted: Vec<(f64, bool)> = predictions
        .iter()
        .map(|&(s, l)| (s, l == Label::Malicious))
        .collect();
    sorted.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());

    let mut points = vec![RocPoint { fpr: 0.0, tpr: 0.0, lambda: 1.0 }];
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0usize;
    while i < sorted.len() {
        let score = sorted[i].0;
        while i < sorted.len() && sorted[i].0 == score {
            if sorted[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        // This point admits every sample scoring >= `score`; any lambda
        // just below `score` realizes it under the strict > rule.
        points.push(RocPoint {
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
            lambda: if i < sorted.len() { sorted[i].0 } else { 0.0 },
        });
    }

    let mut auc = 0.0;
    for w in points.windows(2) {
        auc += (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0;
    }

    let points = if max_points > 2 && points.len() > max_points {
        let last = points.len() - 1;
        let mut thinned: Vec<RocPoint> = (0..max_points - 1)
            .map(|k| points[k * last / (max_points - 1)])
            .collect();
        thinned.push(points[last]);
        thinned
    } else {
        points
    };
    Ok(RocCurve { points, auc })
}

/// Brute-force AUC oracle: P(score_mal > score_ben) + 0.5 P(tie) over
/// all cross-class pairs.
pub fn pairwise_auc(predictions: &[(f64, Label)]) -> Result<f64> {
    let mal: Vec<f64> = predictions
        .iter()
        .filter(|(_, l)| *l == Label::Malicious)
        .map(|&(s, _)| s)
        .collect();
    let ben: Vec<f64> = predictions
        .iter()
        .filter(|(_, l)| *l != Label::Malicious)
        .map(|&(s, _)| s)
        .collect();
    if mal.is_empty() || ben.is_empty() {
        return Err(HstfError::SingleClass);
    }
    let mut score = 0.0f64;
    for &m in &mal {
        for &b in &ben {
            if m > b {
                score += 1.0;
            } else if m == b {
                score += 0.5;
            }
        }
    }
    Ok(score / (mal.len() * ben.len()) as f64)
}
