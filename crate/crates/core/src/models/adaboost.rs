//! Discrete AdaBoost over decision stumps.
//!
//! Round `t` picks the stump with the lowest weighted error `e_t`, gives it
//! the vote `a_t = ln((1 - e_t) / e_t) / 2`, multiplies each row weight by
//! `exp(-a_t * y * h(x))` and renormalizes. Boosting stops early once the
//! best error reaches 0.5 (that stump is discarded) or hits 0 (its vote is
//! capped at `ln(1e12)` and it is the last one kept).
//!
//! The probability is `sigmoid(2 * sum(a_t h_t(x)) / sum(a_t))`, a monotone
//! map of the normalized margin.

use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sigmoid;
use super::tree::{column_levels, midpoint, Criterion};
use crate::error::{Error, Result};

/// Largest vote a single stump can receive.
pub fn alpha_cap() -> f64 {
    1e12f64.ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaBoostParams {
    pub n_rounds: usize,
}

impl Default for AdaBoostParams {
    fn default() -> Self {
        AdaBoostParams { n_rounds: 100 }
    }
}

impl AdaBoostParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_rounds == 0 {
            return Err(Error::invalid("adaboost n_rounds", "must be at least 1"));
        }
        Ok(())
    }
}

/// One-split classifier: with `polarity` +1 it votes positive when
/// `x[feature] > threshold`; with -1 when `x[feature] <= threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    pub polarity: i8,
    pub alpha: f64,
    /// Gini impurity decrease of the split under the round's weights.
    pub gain: f64,
}

impl Stump {
    pub fn vote(&self, value: f64) -> f64 {
        let above = value > self.threshold;
        if above == (self.polarity > 0) {
            1.0
        } else {
            -1.0
        }
    }
}

/// Best split found in one round, before its vote is known.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StumpChoice {
    pub feature: usize,
    pub threshold: f64,
    pub polarity: i8,
    pub error: f64,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaBoostModel {
    stumps: Vec<Stump>,
}

/// Per-column search structure: the sorted row order of a general column,
/// or for a two-valued column the rows holding its rarer value.
pub struct SortedColumns {
    columns: Vec<ColumnIndex>,
}

enum ColumnIndex {
    Sorted(Vec<usize>),
    TwoValued {
        lo: f64,
        hi: f64,
        rare_is_hi: bool,
        rare: Vec<usize>,
    },
}

impl SortedColumns {
    pub fn new(x: ArrayView2<f64>) -> Self {
        let levels = column_levels(x);
        let columns = levels
            .into_par_iter()
            .enumerate()
            .map(|(c, level)| {
                let col = x.column(c);
                match level {
                    Some((lo, hi)) => {
                        let highs: Vec<usize> = (0..x.nrows()).filter(|&r| col[r] == hi).collect();
                        let rare_is_hi = 2 * highs.len() <= x.nrows();
                        let rare = if rare_is_hi { highs } else { (0..x.nrows()).filter(|&r| col[r] == lo).collect() };
                        ColumnIndex::TwoValued { lo, hi, rare_is_hi, rare }
                    }
                    None => {
                        let mut idx: Vec<usize> = (0..x.nrows()).collect();
                        idx.sort_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
                        ColumnIndex::Sorted(idx)
                    }
                }
            })
            .collect();
        SortedColumns { columns }
    }
}

/// Lowest-error stump under `w` (assumed to sum to one). Ties go to the
/// lower feature, then the lower threshold, then polarity +1. `None` when
/// every column is constant.
pub fn best_stump(x: ArrayView2<f64>, y: &[bool], w: &[f64], sorted: &SortedColumns) -> Option<StumpChoice> {
    let (wp, wn) = class_weights(y, w);
    let parent = Criterion::Gini.impurity(wp, wn) * (wp + wn);
    // scores the split with class weights (lp, ln) at or below `threshold`
    let candidate = |feature: usize, threshold: f64, lp: f64, ln: f64| {
        // polarity +1 errs on positives at or below the threshold and
        // negatives above it
        let up = lp + (wn - ln);
        let down = ln + (wp - lp);
        let (polarity, error) = if down < up { (-1, down) } else { (1, up) };
        let (rp, rn) = (wp - lp, wn - ln);
        let gain = parent - Criterion::Gini.impurity(lp, ln) * (lp + ln) - Criterion::Gini.impurity(rp, rn) * (rp + rn);
        StumpChoice {
            feature,
            threshold,
            polarity,
            error: error.max(0.0),
            gain: gain.max(0.0),
        }
    };
    let per_feature: Vec<Option<StumpChoice>> = sorted
        .columns
        .par_iter()
        .enumerate()
        .map(|(feature, index)| match index {
            ColumnIndex::TwoValued { lo, hi, rare_is_hi, rare } => {
                let (sp, sn) = rare.iter().fold((0.0, 0.0), |(p, n), &r| if y[r] { (p + w[r], n) } else { (p, n + w[r]) });
                let (lp, ln) = if *rare_is_hi { (wp - sp, wn - sn) } else { (sp, sn) };
                Some(candidate(feature, midpoint(*lo, *hi), lp, ln))
            }
            ColumnIndex::Sorted(order) => {
                let col = x.column(feature);
                let (mut lp, mut ln) = (0.0, 0.0);
                let mut best: Option<StumpChoice> = None;
                for i in 0..order.len().saturating_sub(1) {
                    let r = order[i];
                    if y[r] {
                        lp += w[r];
                    } else {
                        ln += w[r];
                    }
                    let (value, next) = (col[r], col[order[i + 1]]);
                    if value == next {
                        continue;
                    }
                    let c = candidate(feature, midpoint(value, next), lp, ln);
                    if best.is_none_or(|b| c.error < b.error) {
                        best = Some(c);
                    }
                }
                best
            }
        })
        .collect();
    per_feature
        .into_iter()
        .flatten()
        .fold(None, |acc: Option<StumpChoice>, c| match acc {
            Some(a) if a.error <= c.error => Some(a),
            _ => Some(c),
        })
}

fn class_weights(y: &[bool], w: &[f64]) -> (f64, f64) {
    y.iter().zip(w).fold((0.0, 0.0), |(p, n), (&l, &wi)| if l { (p + wi, n) } else { (p, n + wi) })
}

impl AdaBoostModel {
    pub fn from_stumps(stumps: Vec<Stump>) -> Result<Self> {
        if stumps.iter().any(|s| !s.alpha.is_finite() || s.alpha < 0.0) {
            return Err(Error::ModelFormat("adaboost stump weights must be finite and nonnegative".into()));
        }
        Ok(AdaBoostModel { stumps })
    }

    pub fn stumps(&self) -> &[Stump] {
        &self.stumps
    }

    pub fn fit(x: ArrayView2<f64>, y: &[bool], w: &[f64], params: &AdaBoostParams) -> Result<Self> {
        Ok(Self::fit_traced(x, y, w, params)?.0)
    }

    /// Like [`AdaBoostModel::fit`], also returning the weighted error of
    /// every kept round.
    pub fn fit_traced(x: ArrayView2<f64>, y: &[bool], w: &[f64], params: &AdaBoostParams) -> Result<(Self, Vec<f64>)> {
        params.validate()?;
        let total: f64 = w.iter().sum();
        if total.is_nan() || total <= 0.0 {
            return Err(Error::invalid("weights", "weights must not all be zero"));
        }
        let mut weights: Vec<f64> = w.iter().map(|v| v / total).collect();
        let sorted = SortedColumns::new(x);
        let mut stumps = Vec::new();
        let mut errors = Vec::new();
        for _ in 0..params.n_rounds {
            let Some(choice) = best_stump(x, y, &weights, &sorted) else {
                break;
            };
            if choice.error >= 0.5 {
                break;
            }
            let alpha = if choice.error <= 0.0 {
                alpha_cap()
            } else {
                (0.5 * ((1.0 - choice.error) / choice.error).ln()).min(alpha_cap())
            };
            let stump = Stump {
                feature: choice.feature,
                threshold: choice.threshold,
                polarity: choice.polarity,
                alpha,
                gain: choice.gain,
            };
            stumps.push(stump);
            errors.push(choice.error);
            if choice.error <= 0.0 {
                break;
            }
            let col = x.column(choice.feature);
            for (r, wr) in weights.iter_mut().enumerate() {
                let target = if y[r] { 1.0 } else { -1.0 };
                *wr *= (-alpha * target * stump.vote(col[r])).exp();
            }
            let z: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|v| *v /= z);
        }
        Ok((AdaBoostModel { stumps }, errors))
    }

    /// `sum(a_t h_t(x))` for every row.
    pub fn margins(&self, x: ArrayView2<f64>) -> Vec<f64> {
        x.outer_iter()
            .map(|row| self.stumps.iter().map(|s| s.alpha * s.vote(row[s.feature])).sum())
            .collect()
    }

    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Vec<f64> {
        let total: f64 = self.stumps.iter().map(|s| s.alpha).sum();
        self.margins(x)
            .into_iter()
            .map(|m| if total > 0.0 { sigmoid(2.0 * m / total) } else { 0.5 })
            .collect()
    }

    /// Vote-weighted stump gains per column, normalized to sum to one.
    pub fn column_importance(&self, n_cols: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_cols];
        for s in &self.stumps {
            out[s.feature] += s.alpha * s.gain;
        }
        super::forest::normalize(&mut out);
        out
    }
}
