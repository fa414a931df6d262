use alloc::vec::Vec;

use crate::error::{bail, Error, Result};

fn check(scores: &[f64], labels: &[u8]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        bail!(Validation, "{} scores for {} labels", scores.len(), labels.len());
    }
    if scores.iter().any(|s| s.is_nan()) {
        bail!(Numeric, "NaN score");
    }
    let pos = labels.iter().filter(|&&l| l != 0).count();
    let neg = labels.len() - pos;
    if pos == 0 {
        return Err(Error::UndefinedAuc("negatives"));
    }
    if neg == 0 {
        return Err(Error::UndefinedAuc("positives"));
    }
    Ok((pos, neg))
}

/// Indices sorted by descending score.
fn descending(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    idx
}

/// Mann-Whitney estimate of `P(score_pos > score_neg)`, ties counting one half.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (pos, neg) = check(scores, labels)?;
    let idx = descending(scores);
    // Walk tie groups from the top; each positive beats every negative ranked
    // strictly below it and half of the negatives tied with it.
    let mut negs_below = neg as f64;
    let mut wins = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        let (mut p, mut n) = (0.0, 0.0);
        while j < idx.len() && scores[idx[j]] == scores[idx[i]] {
            if labels[idx[j]] != 0 {
                p += 1.0;
            } else {
                n += 1.0;
            }
            j += 1;
        }
        negs_below -= n;
        wins += p * (negs_below + 0.5 * n);
        i = j;
    }
    Ok(wins / (pos as f64 * neg as f64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    /// Scores `>=` this value are predicted positive.
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC curve from `(0, 0)` to `(1, 1)`, one point per distinct score.
pub fn roc_curve(scores: &[f64], labels: &[u8]) -> Result<Vec<RocPoint>> {
    let (pos, neg) = check(scores, labels)?;
    let idx = descending(scores);
    let mut out = Vec::with_capacity(idx.len() + 1);
    out.push(RocPoint { threshold: f64::INFINITY, fpr: 0.0, tpr: 0.0 });
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < idx.len() {
        let s = scores[idx[i]];
        while i < idx.len() && scores[idx[i]] == s {
            if labels[idx[i]] != 0 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        out.push(RocPoint { threshold: s, fpr: fp as f64 / neg as f64, tpr: tp as f64 / pos as f64 });
    }
    Ok(out)
}
