//! Class-imbalance remedies for training data: random undersampling of the
//! majority class and cost-sensitive row weights.
//!
//! Both are meant for training rows only. The minority class is whichever
//! label is less frequent in the rows given; on an exact tie the negative
//! class counts as the minority.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::dataset::class_counts;
use crate::encode::EncodedMatrix;
use crate::error::{Error, Result};
use crate::models::WeightVector;
use crate::seed::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImbalanceMethod {
    #[default]
    None,
    Undersample,
    #[serde(alias = "weights")]
    CostSensitive,
}

impl ImbalanceMethod {
    pub fn name(self) -> &'static str {
        match self {
            ImbalanceMethod::None => "none",
            ImbalanceMethod::Undersample => "undersample",
            ImbalanceMethod::CostSensitive => "cost_sensitive",
        }
    }

    /// Row label used in report tables.
    pub fn display_name(self) -> &'static str {
        match self {
            ImbalanceMethod::None => "Baseline",
            ImbalanceMethod::Undersample => "Undersampling",
            ImbalanceMethod::CostSensitive => "Cost-sensitive",
        }
    }
}

impl fmt::Display for ImbalanceMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ImbalanceMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(ImbalanceMethod::None),
            "undersample" => Ok(ImbalanceMethod::Undersample),
            "cost_sensitive" | "weights" => Ok(ImbalanceMethod::CostSensitive),
            _ => Err(Error::invalid(
                "imbalance method",
                format!("`{s}` (expected none, undersample or weights)"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImbalancePlan {
    pub method: ImbalanceMethod,
    /// Target minority:majority ratio after undersampling.
    pub ratio: f64,
    /// Minority-row weight under cost-sensitive learning.
    pub factor: f64,
    pub seed: u64,
}

impl Default for ImbalancePlan {
    fn default() -> Self {
        ImbalancePlan {
            method: ImbalanceMethod::None,
            ratio: 1.0,
            factor: 5.0,
            seed: 0,
        }
    }
}

impl ImbalancePlan {
    pub fn new(method: ImbalanceMethod) -> Self {
        ImbalancePlan {
            method,
            ..ImbalancePlan::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ratio > 0.0 && self.ratio.is_finite()) {
            return Err(Error::invalid("undersampling ratio", "must be positive"));
        }
        if !(self.factor >= 1.0 && self.factor.is_finite()) {
            return Err(Error::invalid("minority weight factor", "must be at least 1"));
        }
        Ok(())
    }

    /// Applies the plan to training rows, returning the rows to train on and
    /// their weights.
    pub fn prepare(&self, train: &EncodedMatrix) -> Result<(EncodedMatrix, WeightVector)> {
        self.validate()?;
        match self.method {
            ImbalanceMethod::None => Ok((train.clone(), WeightVector::uniform(train.n_rows()))),
            ImbalanceMethod::Undersample => {
                let sub = undersample(train, self)?;
                let n = sub.n_rows();
                Ok((sub, WeightVector::uniform(n)))
            }
            ImbalanceMethod::CostSensitive => {
                let w = class_weights(train.require_labels()?, self.factor)?;
                Ok((train.clone(), w))
            }
        }
    }
}

fn minority_label(labels: &[bool]) -> Result<bool> {
    let (pos, neg) = class_counts(labels);
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    Ok(pos < neg)
}

/// Rows kept by undersampling, in their original order: every minority row
/// plus a uniform random subset of `round(minority / ratio)` majority rows
/// (all of them if that is not fewer).
pub fn undersample_indices(labels: &[bool], ratio: f64, seed: u64) -> Result<Vec<usize>> {
    if !(ratio > 0.0 && ratio.is_finite()) {
        return Err(Error::invalid("undersampling ratio", "must be positive"));
    }
    let minority = minority_label(labels)?;
    let majority_rows: Vec<usize> = (0..labels.len()).filter(|&r| labels[r] != minority).collect();
    let n_minority = labels.len() - majority_rows.len();
    let target = ((n_minority as f64 / ratio).round() as usize).min(majority_rows.len());
    let mut keep = vec![false; labels.len()];
    for (r, &l) in labels.iter().enumerate() {
        keep[r] = l == minority;
    }
    let mut rng = rng_from_seed(seed);
    for i in sample(&mut rng, majority_rows.len(), target) {
        keep[majority_rows[i]] = true;
    }
    Ok((0..labels.len()).filter(|&r| keep[r]).collect())
}

pub fn undersample(matrix: &EncodedMatrix, plan: &ImbalancePlan) -> Result<EncodedMatrix> {
    let rows = undersample_indices(matrix.require_labels()?, plan.ratio, plan.seed)?;
    Ok(matrix.select_rows(&rows))
}

/// Weight 1 for majority rows and `factor` for minority rows.
pub fn class_weights(labels: &[bool], factor: f64) -> Result<WeightVector> {
    if !(factor >= 1.0 && factor.is_finite()) {
        return Err(Error::invalid("minority weight factor", "must be at least 1"));
    }
    let minority = minority_label(labels)?;
    WeightVector::new(labels.iter().map(|&l| if l == minority { factor } else { 1.0 }).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(pos: usize, neg: usize) -> Vec<bool> {
        // interleave so order preservation is visible
        let mut out = Vec::new();
        let (mut p, mut n) = (0, 0);
        while p < pos || n < neg {
            if p < pos {
                out.push(true);
                p += 1;
            }
            if n < neg {
                out.push(false);
                n += 1;
            }
        }
        out
    }

    #[test]
    fn balances_to_the_minority_count() {
        let y = labels(1000, 200);
        let rows = undersample_indices(&y, 1.0, 7).unwrap();
        let kept: Vec<bool> = rows.iter().map(|&r| y[r]).collect();
        assert_eq!(class_counts(&kept), (200, 200));
        assert!(rows.windows(2).all(|w| w[0] < w[1]));
        let negatives = y.iter().filter(|&&l| !l).count();
        assert_eq!(rows.iter().filter(|&&r| !y[r]).count(), negatives);
        assert_eq!(rows, undersample_indices(&y, 1.0, 7).unwrap());
        assert_ne!(rows, undersample_indices(&y, 1.0, 8).unwrap());
    }

    #[test]
    fn ratio_controls_majority_size() {
        let y = labels(1000, 200);
        let rows = undersample_indices(&y, 0.5, 1).unwrap();
        assert_eq!(rows.len(), 200 + 400);
        let all = undersample_indices(&y, 0.1, 1).unwrap();
        assert_eq!(all, (0..1200).collect::<Vec<_>>());
    }

    #[test]
    fn minority_can_be_positive() {
        let y = labels(10, 30);
        let rows = undersample_indices(&y, 1.0, 0).unwrap();
        assert_eq!(rows.len(), 20);
        let w = class_weights(&y, 5.0).unwrap();
        assert!(y.iter().zip(w.as_slice()).all(|(&l, &w)| w == if l { 5.0 } else { 1.0 }));
    }

    #[test]
    fn five_times_rule() {
        let y = labels(81, 19);
        let w = class_weights(&y, 5.0).unwrap();
        assert!(y.iter().zip(w.as_slice()).all(|(&l, &w)| w == if l { 1.0 } else { 5.0 }));
        assert!(class_weights(&y, 1.0).unwrap().as_slice().iter().all(|&w| w == 1.0));
    }

    #[test]
    fn errors() {
        assert!(matches!(undersample_indices(&[true, true], 1.0, 0), Err(Error::SingleClass)));
        assert!(class_weights(&[false], 5.0).is_err());
        assert!(class_weights(&[false, true], 0.5).is_err());
        assert!(undersample_indices(&[false, true], 0.0, 0).is_err());
        assert!(ImbalancePlan { ratio: -1.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn method_names() {
        assert_eq!("weights".parse::<ImbalanceMethod>().unwrap(), ImbalanceMethod::CostSensitive);
        let plan: ImbalancePlan = toml::from_str("method = \"weights\"\nfactor = 3.0").unwrap();
        assert_eq!(plan.method, ImbalanceMethod::CostSensitive);
        assert!("smote".parse::<ImbalanceMethod>().is_err());
    }
}
