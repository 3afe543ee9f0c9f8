//! Classification metrics, class weights and threshold selection.

use crate::error::{Error, Result};

fn check_lengths(a: usize, b: usize, op: &str) -> Result<()> {
    if a != b {
        return Err(Error::InvalidArgument(format!("{op}: {a} predictions for {b} labels")));
    }
    if a == 0 {
        return Err(Error::InvalidArgument(format!("{op}: empty input")));
    }
    Ok(())
}

fn f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Unweighted mean of the F1 scores of both classes; `0/0` counts as 0.
pub fn macro_f1(predictions: &[bool], labels: &[bool]) -> Result<f64> {
    check_lengths(predictions.len(), labels.len(), "macro_f1")?;
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (&p, &y) in predictions.iter().zip(labels) {
        match (p, y) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    Ok((f1(tp, fp, fn_) + f1(tn, fn_, fp)) / 2.0)
}

/// Mann-Whitney AUC with midranks for ties. Errors unless both classes
/// are present.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_lengths(scores.len(), labels.len(), "roc_auc")?;
    let n_pos = labels.iter().filter(|&&y| y).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::InvalidArgument("roc_auc is undefined for a single class".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite { op: "roc_auc".into() });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks are 1-based; the tie group i..=j shares their mean
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += midrank * order[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

pub fn predict(scores: &[f64], threshold: f64) -> Vec<bool> {
    scores.iter().map(|&s| s >= threshold).collect()
}

/// Validation threshold: midpoints of adjacent sorted unique scores plus
/// 0.5, maximizing macro-F1; ties go to the smallest threshold.
pub fn select_threshold(scores: &[f64], labels: &[bool]) -> Result<(f64, f64)> {
    check_lengths(scores.len(), labels.len(), "select_threshold")?;
    let mut unique: Vec<f64> = scores.to_vec();
    unique.sort_by(f64::total_cmp);
    unique.dedup();
    let mut candidates: Vec<f64> = unique.windows(2).map(|w| (w[0] + w[1]) / 2.0).collect();
    candidates.push(0.5);
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let mut best = (candidates[0], f64::NEG_INFINITY);
    for &t in &candidates {
        let f = macro_f1(&predict(scores, t), labels)?;
        if f > best.1 {
            best = (t, f);
        }
    }
    Ok(best)
}

/// Balanced weights `(w_neg, w_pos) = (n / (2·n_neg), n / (2·n_pos))`.
pub fn balanced_weights(labels: &[bool]) -> Result<(f64, f64)> {
    let n = labels.len() as f64;
    let pos = labels.iter().filter(|&&y| y).count() as f64;
    let neg = n - pos;
    if pos == 0.0 || neg == 0.0 {
        return Err(Error::Structure(format!(
            "class weighting needs both classes in training data ({pos} positive, {neg} negative)"
        )));
    }
    Ok((n / (2.0 * neg), n / (2.0 * pos)))
}

/// Mean weighted binary cross-entropy with the tape's probability clamp.
pub fn weighted_bce(probs: &[f64], labels: &[bool], weights: (f64, f64)) -> Result<f64> {
    check_lengths(probs.len(), labels.len(), "weighted_bce")?;
    let lo = crate::autodiff::PROB_CLAMP;
    let total: f64 = probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(lo, 1.0 - lo);
            if y {
                -weights.1 * p.ln()
            } else {
                -weights.0 * (1.0 - p).ln()
            }
        })
        .sum();
    Ok(total / probs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn b(v: &[u8]) -> Vec<bool> {
        v.iter().map(|&x| x == 1).collect()
    }

    #[test]
    fn macro_f1_examples() {
        assert_eq!(macro_f1(&b(&[1, 0, 1]), &b(&[1, 0, 1])).unwrap(), 1.0);
        let m = macro_f1(&b(&[1, 0, 0, 0]), &b(&[1, 1, 0, 0])).unwrap();
        assert!((m - (2.0 / 3.0 + 0.8) / 2.0).abs() < 1e-15);
        assert!(macro_f1(&[], &[]).is_err());
        assert!(macro_f1(&b(&[1]), &b(&[1, 0])).is_err());
    }

    #[test]
    fn roc_auc_examples() {
        let y = b(&[1, 1, 0, 0]);
        assert_eq!(roc_auc(&[0.9, 0.8, 0.3, 0.2], &y).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.9, 0.4, 0.6, 0.3], &b(&[1, 0, 0, 1])).unwrap(), 0.5);
        assert_eq!(roc_auc(&[0.4; 4], &y).unwrap(), 0.5);
        assert_eq!(roc_auc(&[0.0, 0.0, 1.0, 1.0], &y).unwrap(), 0.0);
        assert!(roc_auc(&[0.1, 0.2], &b(&[1, 1])).is_err());
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(select_threshold(&[0.1, 0.9], &b(&[0, 1])).unwrap(), (0.5, 1.0));
        assert_eq!(select_threshold(&[0.3; 5], &b(&[0, 1, 0, 1, 1])).unwrap().0, 0.5);
        assert!(select_threshold(&[], &[]).is_err());
    }

    #[test]
    fn class_weights_and_loss() {
        let labels: Vec<bool> = (0..10).map(|i| i < 2).collect();
        let (w0, w1) = balanced_weights(&labels).unwrap();
        assert_eq!((w0, w1), (0.625, 2.5));
        let loss = weighted_bce(&[0.5; 10], &labels, (w0, w1)).unwrap();
        assert!((loss - 2f64.ln()).abs() < 1e-15);
        assert!((weighted_bce(&[0.5], &[true], (1.0, 1.0)).unwrap() - 0.6931).abs() < 1e-4);
        assert!(weighted_bce(&[1.0], &[true], (1.0, 1.0)).unwrap() < 1.1e-7);
        assert!(balanced_weights(&[true, true]).is_err());
    }

    proptest! {
        #[test]
        fn selected_threshold_beats_every_candidate(
            pts in proptest::collection::vec((0.0f64..1.0, any::<bool>()), 20)
        ) {
            let (scores, labels): (Vec<f64>, Vec<bool>) = pts.into_iter().unzip();
            let (t, f) = select_threshold(&scores, &labels).unwrap();
            let mut sorted = scores.clone();
            sorted.sort_by(f64::total_cmp);
            sorted.dedup();
            let mut cands: Vec<f64> = sorted.windows(2).map(|w| (w[0] + w[1]) / 2.0).collect();
            cands.push(0.5);
            prop_assert!(cands.contains(&t));
            for c in cands {
                prop_assert!(f >= macro_f1(&predict(&scores, c), &labels).unwrap());
            }
        }
    }
}
