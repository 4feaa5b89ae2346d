//! Random forest of weighted decision trees.
//!
//! Each tree sees a bootstrap of `n` rows drawn with probability
//! proportional to the training weights; a row drawn `c` times enters the
//! tree with weight `c`. Without bootstrapping every tree sees all rows at
//! their given weights. The predicted probability is the fraction of trees
//! voting positive.

use ndarray::ArrayView2;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{column_levels, Criterion, DecisionTree, TreeParams};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Features considered per split; `floor(sqrt(d))` when absent.
    pub features_per_split: Option<usize>,
    pub criterion: Criterion,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: None,
            min_leaf: 1,
            features_per_split: None,
            criterion: Criterion::Gini,
            bootstrap: true,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::invalid("forest n_trees", "must be at least 1"));
        }
        if self.min_leaf == 0 {
            return Err(Error::invalid("forest min_leaf", "must be at least 1"));
        }
        if self.features_per_split == Some(0) {
            return Err(Error::invalid("forest features_per_split", "must be at least 1"));
        }
        Ok(())
    }

    fn tree_params(&self, n_cols: usize) -> TreeParams {
        let default = ((n_cols as f64).sqrt().floor() as usize).max(1);
        TreeParams {
            max_depth: self.max_depth,
            min_leaf: self.min_leaf,
            features_per_split: self.features_per_split.unwrap_or(default),
            criterion: self.criterion,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    trees: Vec<DecisionTree>,
}

impl ForestModel {
    pub fn from_trees(trees: Vec<DecisionTree>) -> Self {
        ForestModel { trees }
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    /// Trees are grown in parallel; tree `t` uses the stage seed `tree-t`,
    /// so the result does not depend on the thread count.
    pub fn fit(x: ArrayView2<f64>, y: &[bool], w: &[f64], params: &ForestParams, seed: u64) -> Self {
        let n = y.len();
        let tree_params = params.tree_params(x.ncols());
        let levels = column_levels(x);
        let sampler = if params.bootstrap {
            Some(WeightedIndex::new(w).expect("weights are validated before training"))
        } else {
            None
        };
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = rng_from_seed(derive_seed(seed, &format!("tree-{t}")));
                match &sampler {
                    Some(dist) => {
                        let mut counts = vec![0.0; n];
                        for _ in 0..n {
                            counts[dist.sample(&mut rng)] += 1.0;
                        }
                        let rows = (0..n).filter(|&r| counts[r] > 0.0).collect();
                        DecisionTree::fit_with_levels(x, y, &counts, rows, &tree_params, &levels, &mut rng)
                    }
                    None => {
                        let rows = (0..n).filter(|&r| w[r] > 0.0).collect();
                        DecisionTree::fit_with_levels(x, y, w, rows, &tree_params, &levels, &mut rng)
                    }
                }
            })
            .collect();
        ForestModel { trees }
    }

    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Vec<f64> {
        let n_trees = self.trees.len() as f64;
        x.outer_iter()
            .map(|row| self.trees.iter().filter(|t| t.predict_row(row)).count() as f64 / n_trees)
            .collect()
    }

    /// Mean impurity decrease per column, normalized to sum to one.
    pub fn column_importance(&self, n_cols: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_cols];
        for tree in &self.trees {
            tree.accumulate_importance(&mut out);
        }
        normalize(&mut out);
        out
    }
}

pub(crate) fn normalize(values: &mut [f64]) {
    let total: f64 = values.iter().sum();
    if total > 0.0 {
        values.iter_mut().for_each(|v| *v /= total);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn toy() -> (Array2<f64>, Vec<bool>) {
        // column 0 decides the label, column 1 is constant noise-free filler
        let x = Array2::from_shape_fn((40, 3), |(r, c)| match c {
            0 => r as f64,
            1 => 1.0,
            _ => ((r * 7) % 5) as f64,
        });
        let y = (0..40).map(|r| r >= 20).collect();
        (x, y)
    }

    #[test]
    fn separates_and_ranks_the_signal_column() {
        let (x, y) = toy();
        let params = ForestParams {
            n_trees: 25,
            features_per_split: Some(3),
            ..ForestParams::default()
        };
        let model = ForestModel::fit(x.view(), &y, &[1.0; 40], &params, 9);
        let p = model.predict_proba(x.view());
        assert!(p[..20].iter().all(|&v| v < 0.5));
        assert!(p[20..].iter().all(|&v| v > 0.5));
        let imp = model.column_importance(3);
        assert!(imp[0] > 0.9, "{imp:?}");
        assert!((imp.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn same_seed_same_forest() {
        let (x, y) = toy();
        let params = ForestParams {
            n_trees: 8,
            ..ForestParams::default()
        };
        let a = ForestModel::fit(x.view(), &y, &[1.0; 40], &params, 4);
        let b = ForestModel::fit(x.view(), &y, &[1.0; 40], &params, 4);
        assert_eq!(a, b);
    }

    #[test]
    fn zero_weight_rows_are_never_drawn() {
        let (x, mut y) = toy();
        // flip a label on a row that carries no weight; a full-depth forest
        // that never sees it still predicts the majority pattern there
        y[30] = false;
        let mut w = vec![1.0; 40];
        w[30] = 0.0;
        let params = ForestParams {
            n_trees: 10,
            features_per_split: Some(3),
            ..ForestParams::default()
        };
        for bootstrap in [true, false] {
            let model = ForestModel::fit(x.view(), &y, &w, &ForestParams { bootstrap, ..params.clone() }, 1);
            assert!(model.predict_proba(x.view())[30] > 0.5);
        }
    }

    #[test]
    fn rejects_bad_params() {
        assert!(ForestParams { n_trees: 0, ..ForestParams::default() }.validate().is_err());
        assert!(ForestParams { min_leaf: 0, ..ForestParams::default() }.validate().is_err());
        assert!(ForestParams::default().validate().is_ok());
    }
}
