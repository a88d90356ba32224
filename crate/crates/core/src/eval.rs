//! Attack success metrics and structure recovery metrics.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::attack::{activate, ActivationConfig};
use crate::error::{Error, Result};
use crate::structure::StructureKey;

fn class_counts(labels: &[bool]) -> Result<(usize, usize)> {
    let pos = labels.iter().filter(|&&y| y).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric("both classes must be present".into()));
    }
    Ok((pos, neg))
}

/// Probability that a random member outscores a random non-member, ties
/// counting one half.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Parameter("scores and labels differ in length".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Parameter("NaN score".into()));
    }
    let (pos, neg) = class_counts(labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // rank sum of positives with midranks for ties
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let s = scores[order[start]];
        let end = start + order[start..].partition_point(|&k| scores[k] == s);
        let mid = (start + end + 1) as f64 / 2.0;
        rank_sum += mid * order[start..end].iter().filter(|&&k| labels[k]).count() as f64;
        start = end;
    }
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos as f64 * neg as f64))
}

/// `0.5 · (TPR + TNR)`.
pub fn balanced_accuracy(predictions: &[bool], labels: &[bool]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::Parameter("predictions and labels differ in length".into()));
    }
    let (pos, neg) = class_counts(labels)?;
    let tp = predictions.iter().zip(labels).filter(|&(&p, &y)| p && y).count();
    let tn = predictions.iter().zip(labels).filter(|&(&p, &y)| !p && !y).count();
    Ok(0.5 * (tp as f64 / pos as f64 + tn as f64 / neg as f64))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricBundle {
    pub auroc: f64,
    pub balanced_accuracy_simple: f64,
    pub balanced_accuracy_calibrated: f64,
    pub n: usize,
}

/// All three success metrics for log scores, calibrating with `prior`.
pub fn evaluate_scores(log_scores: &[f64], labels: &[bool], prior: f64) -> Result<MetricBundle> {
    let simple = activate(log_scores, &ActivationConfig::simple())?;
    let calibrated = activate(log_scores, &ActivationConfig::calibrated(prior))?;
    Ok(MetricBundle {
        auroc: auroc(log_scores, labels)?,
        balanced_accuracy_simple: balanced_accuracy(&simple.predictions, labels)?,
        balanced_accuracy_calibrated: balanced_accuracy(&calibrated.predictions, labels)?,
        n: labels.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryMetrics {
    pub choice_accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub jaccard: f64,
    pub perfect_match: bool,
}

/// Compares estimated structure keys with the true ones. A choice (edge, or
/// node with its exact parent set) is accurate when the estimate contains
/// it, so for full structures of equal size the accuracy equals recall.
pub fn recovery_metrics(
    truth: &BTreeSet<StructureKey>,
    estimate: &BTreeSet<StructureKey>,
) -> RecoveryMetrics {
    let inter = truth.intersection(estimate).count() as f64;
    let union = truth.union(estimate).count() as f64;
    let ratio = |a: f64, b: f64| if b == 0.0 { 1.0 } else { a / b };
    let recall = ratio(inter, truth.len() as f64);
    RecoveryMetrics {
        choice_accuracy: recall,
        precision: ratio(inter, estimate.len() as f64),
        recall,
        jaccard: ratio(inter, union),
        perfect_match: truth == estimate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auroc_examples() {
        let y = [true, true, false, false];
        assert_eq!(auroc(&[0.9, 0.8, 0.2, 0.1], &y).unwrap(), 1.0);
        assert_eq!(auroc(&[1.0; 4], &y).unwrap(), 0.5);
        assert_eq!(auroc(&[0.1, 0.8, 0.2, 0.9], &y).unwrap(), 0.25);
        assert!(matches!(auroc(&[1.0, 2.0], &[true, true]), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn balanced_accuracy_examples() {
        let y = [true, false, false, true, false];
        assert_eq!(balanced_accuracy(&y, &y).unwrap(), 1.0);
        assert_eq!(balanced_accuracy(&[true; 5], &y).unwrap(), 0.5);
        // tp 1 of 2, tn 2 of 3
        let p = [true, true, false, false, false];
        assert!((balanced_accuracy(&p, &y).unwrap() - 0.5 * (0.5 + 2.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn recovery_examples() {
        let e = |v: &[(usize, usize)]| v.iter().map(|&(i, j)| StructureKey::edge(i, j)).collect::<BTreeSet<_>>();
        let t = e(&[(0, 1), (1, 2)]);
        let m = recovery_metrics(&t, &t);
        assert!(m.perfect_match && m.jaccard == 1.0 && m.precision == 1.0);
        let m = recovery_metrics(&t, &e(&[(0, 2), (2, 3)]));
        assert_eq!((m.precision, m.recall, m.jaccard), (0.0, 0.0, 0.0));
        let m = recovery_metrics(&t, &e(&[(0, 1), (1, 2), (0, 3), (2, 3)]));
        assert_eq!((m.recall, m.precision, m.jaccard), (1.0, 0.5, 0.5));
        assert!(!m.perfect_match);
    }
}
