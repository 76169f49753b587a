use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Pooled one-vs-rest (score, is_positive) pairs.
fn pooled(probs: &[Vec<f64>], y: &[usize]) -> Result<Vec<(f64, bool)>> {
    let first = y.first().ok_or(Error::SingleClassTest)?;
    if y.iter().all(|c| c == first) {
        return Err(Error::SingleClassTest);
    }
    Ok(probs
        .iter()
        .zip(y)
        .flat_map(|(p, &label)| p.iter().enumerate().map(move |(k, &s)| (s, k == label)))
        .collect())
}

/// Micro-averaged one-vs-rest AUC by the Mann–Whitney rank statistic with
/// mid-ranks for ties.
pub fn roc_auc_ovr_micro(probs: &[Vec<f64>], y: &[usize]) -> Result<f64> {
    let mut pairs = pooled(probs, y)?;
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n_pos = pairs.iter().filter(|p| p.1).count() as f64;
    let n_neg = pairs.len() as f64 - n_pos;
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < pairs.len() {
        let mut j = i;
        while j + 1 < pairs.len() && pairs[j + 1].0 == pairs[i].0 {
            j += 1;
        }
        // Ranks are 1-based; the tie group i..=j shares their mean.
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += mid * pairs[i..=j].iter().filter(|p| p.1).count() as f64;
        i = j + 1;
    }
    Ok((rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg))
}

/// Pooled ROC curve as `(fpr, tpr)` points from `(0,0)` to `(1,1)`, one point
/// per distinct score threshold.
pub fn roc_curve_ovr_micro(probs: &[Vec<f64>], y: &[usize]) -> Result<Vec<(f64, f64)>> {
    let mut pairs = pooled(probs, y)?;
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let n_pos = pairs.iter().filter(|p| p.1).count() as f64;
    let n_neg = pairs.len() as f64 - n_pos;
    let mut curve = alloc::vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0.0, 0.0);
    for (i, &(s, pos)) in pairs.iter().enumerate() {
        if pos {
            tp += 1.0;
        } else {
            fp += 1.0;
        }
        if pairs.get(i + 1).is_none_or(|next| next.0 != s) {
            curve.push((fp / n_neg, tp / n_pos));
        }
    }
    Ok(curve)
}
