//! Ranking and threshold metrics for binary labels.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub auroc: f64,
    pub aupr: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub n_pos: usize,
    pub n_neg: usize,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn at_threshold(scores: &[f64], labels: &[u8], threshold: f64) -> Result<Self> {
        check_lengths(scores, labels)?;
        let mut c = Confusion::default();
        for (&s, &y) in scores.iter().zip(labels) {
            match (s >= threshold, y == 1) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        Ok(c)
    }

    pub fn f1(&self) -> f64 {
        let tp = self.tp as f64;
        let precision = if self.tp + self.fp == 0 {
            0.0
        } else {
            tp / (self.tp + self.fp) as f64
        };
        let recall = if self.tp + self.fn_ == 0 {
            0.0
        } else {
            tp / (self.tp + self.fn_) as f64
        };
        if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        }
    }
}

/// Computes AUROC, AUPR and F1 (at `threshold`) in one report.
pub fn evaluate(scores: &[f64], labels: &[u8], threshold: f64) -> Result<MetricsReport> {
    let c = Confusion::at_threshold(scores, labels, threshold)?;
    Ok(MetricsReport {
        auroc: auroc(scores, labels)?,
        aupr: aupr(scores, labels)?,
        f1: c.f1(),
        tp: c.tp,
        fp: c.fp,
        tn: c.tn,
        fn_: c.fn_,
        n_pos: c.tp + c.fn_,
        n_neg: c.fp + c.tn,
        threshold,
    })
}

/// Area under the ROC curve as the normalized Mann-Whitney U statistic. Tied
/// positive/negative pairs count one half.
pub fn auroc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    check_lengths(scores, labels)?;
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }

    let order = sorted_order(scores, false);
    // Sum of (1-based, tie-averaged) ranks of the positives.
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let end = tie_block_end(scores, &order, start);
        let avg_rank = (start + 1 + end) as f64 / 2.0;
        let pos_in_block = order[start..end].iter().filter(|&&i| labels[i] == 1).count();
        rank_sum += avg_rank * pos_in_block as f64;
        start = end;
    }
    let u = rank_sum - (n_pos as f64) * (n_pos as f64 + 1.0) / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Area under the precision-recall curve by step-wise summation of precision
/// over recall increments, sweeping scores from high to low. Tied scores form
/// one step.
pub fn aupr(scores: &[f64], labels: &[u8]) -> Result<f64> {
    check_lengths(scores, labels)?;
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    if n_pos == 0 {
        return Err(Error::NoPositives);
    }

    let order = sorted_order(scores, true);
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut area = 0.0;
    let mut start = 0;
    while start < order.len() {
        let end = tie_block_end(scores, &order, start);
        let new_tp = order[start..end].iter().filter(|&&i| labels[i] == 1).count();
        tp += new_tp;
        fp += end - start - new_tp;
        if new_tp > 0 {
            let precision = tp as f64 / (tp + fp) as f64;
            area += precision * new_tp as f64 / n_pos as f64;
        }
        start = end;
    }
    Ok(area)
}

/// F1 of the predictions `score >= threshold`; zero when precision and
/// recall are both zero.
pub fn f1(scores: &[f64], labels: &[u8], threshold: f64) -> Result<f64> {
    Ok(Confusion::at_threshold(scores, labels, threshold)?.f1())
}

fn check_lengths(scores: &[f64], labels: &[u8]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            actual: scores.len(),
        });
    }
    if let Some(&y) = labels.iter().find(|&&y| y > 1) {
        return Err(Error::InvalidLabel(y.to_string()));
    }
    Ok(())
}

fn sorted_order(scores: &[f64], descending: bool) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    if descending {
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    } else {
        order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    }
    order
}

fn tie_block_end(scores: &[f64], order: &[usize], start: usize) -> usize {
    let value = scores[order[start]];
    let mut end = start + 1;
    while end < order.len() && scores[order[end]] == value {
        end += 1;
    }
    end
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auroc_examples() {
        assert_eq!(auroc(&[0.8, 0.2, 0.6], &[1, 0, 1]).unwrap(), 1.0);
        assert_eq!(auroc(&[0.5, 0.5], &[1, 0]).unwrap(), 0.5);
        assert_eq!(auroc(&[0.1, 0.9], &[1, 0]).unwrap(), 0.0);
        assert!(matches!(auroc(&[0.1, 0.2], &[1, 1]), Err(Error::SingleClass)));
    }

    #[test]
    fn aupr_examples() {
        assert_eq!(aupr(&[0.9, 0.8, 0.1, 0.0], &[1, 1, 0, 0]).unwrap(), 1.0);
        let labels = [1, 0, 0, 1, 0];
        let p = aupr(&[0.3; 5], &labels).unwrap();
        assert!((p - 0.4).abs() < 1e-15);
        // Ranked: pos, neg, pos -> 1/2 * 1 + 1/2 * 2/3.
        let p = aupr(&[0.9, 0.5, 0.1], &[1, 0, 1]).unwrap();
        assert!((p - (0.5 + 1.0 / 3.0)).abs() < 1e-15);
        assert!(matches!(aupr(&[0.1], &[0]), Err(Error::NoPositives)));
    }

    #[test]
    fn f1_examples() {
        // tp=1, fp=1, fn=0
        let v = f1(&[0.9, 0.7, 0.1], &[1, 0, 0], 0.5).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(f1(&[0.1, 0.2], &[1, 0], 0.5).unwrap(), 0.0);
        assert_eq!(f1(&[0.9, 0.2], &[1, 0], 0.5).unwrap(), 1.0);
        // Threshold is inclusive.
        assert_eq!(f1(&[0.5], &[1], 0.5).unwrap(), 1.0);
    }

    #[test]
    fn report_counts_and_json_keys() {
        let r = evaluate(&[0.9, 0.4, 0.6, 0.2], &[1, 1, 0, 0], DEFAULT_THRESHOLD).unwrap();
        assert_eq!((r.tp, r.fp, r.tn, r.fn_), (1, 1, 1, 1));
        assert_eq!((r.n_pos, r.n_neg), (2, 2));
        let json = serde_json::to_value(r).unwrap();
        let mut keys: Vec<_> = json.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(
            keys,
            ["aupr", "auroc", "f1", "fn", "fp", "n_neg", "n_pos", "threshold", "tn", "tp"]
        );
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(
            auroc(&[0.1], &[1, 0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
