//! ROC construction and trapezoidal AUC shared by every AUC variant.
//!
//! Thresholds are the distinct prediction values at positive locations. For
//! each threshold `t` the curve passes through `(#neg > t, #pos > t)` and then
//! `(#neg >= t, #pos >= t)`, so negatives tied with a positive contribute a
//! diagonal step. The trapezoidal area is then exactly the Mann-Whitney
//! statistic with ties counted one half.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{FixationSet, GridMap};
use crate::seed;

/// Points of a closed ROC curve, from `(0, 0)` to `(1, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    points: Vec<(f64, f64)>,
}

impl RocCurve {
    /// Validates the endpoint and monotonicity invariants.
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        let valid = points.first() == Some(&(0.0, 0.0))
            && points.last() == Some(&(1.0, 1.0))
            && points.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 <= w[1].1);
        if !valid {
            return Err(Error::InvalidConfig("ROC points must run monotonically from (0,0) to (1,1)".into()));
        }
        Ok(RocCurve { points })
    }

    /// `(fpr, tpr)` pairs.
    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }
}

fn values_at(pred: &GridMap, set: &FixationSet) -> Result<Vec<f64>> {
    if set.frame() != pred.frame() {
        return Err(Error::DimensionMismatch {
            left: pred.frame().to_string(),
            right: set.frame().to_string(),
        });
    }
    let mut v: Vec<f64> = set.iter().map(|p| pred.at(p)).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    Ok(v)
}

pub fn roc_points(pred: &GridMap, positives: &FixationSet, negatives: &FixationSet) -> Result<RocCurve> {
    if positives.is_empty() {
        return Err(Error::EmptyPositives);
    }
    if negatives.is_empty() {
        return Err(Error::EmptyNegatives);
    }
    let pos = values_at(pred, positives)?;
    let neg = values_at(pred, negatives)?;
    let (np, nn) = (pos.len() as f64, neg.len() as f64);

    let mut points = vec![(0.0, 0.0)];
    // both sorted descending; `*_above` count values strictly above the threshold
    let (mut pos_above, mut neg_above) = (0usize, 0usize);
    let mut i = 0;
    while i < pos.len() {
        let t = pos[i];
        while neg_above < neg.len() && neg[neg_above] > t {
            neg_above += 1;
        }
        let corner = (neg_above as f64 / nn, pos_above as f64 / np);
        if points.last() != Some(&corner) {
            points.push(corner);
        }
        let mut pos_at = i;
        while pos_at < pos.len() && pos[pos_at] >= t {
            pos_at += 1;
        }
        let mut neg_at = neg_above;
        while neg_at < neg.len() && neg[neg_at] >= t {
            neg_at += 1;
        }
        points.push((neg_at as f64 / nn, pos_at as f64 / np));
        pos_above = pos_at;
        neg_above = neg_at;
        i = pos_at;
    }
    points.push((1.0, 1.0));
    Ok(RocCurve { points })
}

/// Trapezoidal area under the curve.
pub fn auc(curve: &RocCurve) -> f64 {
    curve
        .points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}

pub fn auc_single(pred: &GridMap, positives: &FixationSet, negatives: &FixationSet) -> Result<f64> {
    Ok(auc(&roc_points(pred, positives, negatives)?))
}

/// Mean and spread of an AUC over repeated negative draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AucSummary {
    pub mean: f64,
    /// Population standard deviation across splits.
    pub std: f64,
    pub n_splits: usize,
}

impl AucSummary {
    pub fn from_scores(scores: &[f64]) -> Self {
        let n = scores.len() as f64;
        let mean = scores.iter().sum::<f64>() / n;
        let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
        AucSummary {
            mean,
            std: var.sqrt(),
            n_splits: scores.len(),
        }
    }
}

/// Averages [`auc_single`] over `n_splits` negative sets. Split `i` draws with
/// seed `derive(seed, i)`, so the result is independent of evaluation order.
pub fn auc_averaged<S>(
    pred: &GridMap,
    positives: &FixationSet,
    sampler: S,
    n_splits: usize,
    seed: u64,
) -> Result<AucSummary>
where
    S: Fn(u64) -> Result<FixationSet> + Sync,
{
    if n_splits == 0 {
        return Err(Error::InvalidSplits);
    }
    if positives.frame() != pred.frame() {
        return Err(Error::DimensionMismatch {
            left: pred.frame().to_string(),
            right: positives.frame().to_string(),
        });
    }
    let scores = (0..n_splits as u64)
        .into_par_iter()
        .map(|split| {
            let negatives = sampler(seed::derive(seed, split))?;
            if negatives.is_empty() {
                return Err(Error::SamplerExhausted);
            }
            auc_single(pred, positives, &negatives)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(AucSummary::from_scores(&scores))
}
