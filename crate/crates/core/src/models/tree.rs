//! Weighted binary decision trees.
//!
//! A node splits on `x[feature] <= threshold` (left) versus `>` (right),
//! choosing the candidate with the largest weighted impurity decrease
//! `W * I(node) - W_l * I(left) - W_r * I(right)`. Candidates are visited in
//! ascending feature order and ascending threshold, and only a strictly
//! better gain replaces the incumbent, so ties go to the lowest feature index
//! and then the lowest threshold.

use ndarray::{ArrayView1, ArrayView2};
use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Splits must improve weighted impurity by more than this fraction of the
/// node weight.
const MIN_RELATIVE_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    #[default]
    Gini,
    Entropy,
}

impl Criterion {
    /// Impurity of a node holding the given class weights.
    pub fn impurity(self, pos: f64, neg: f64) -> f64 {
        let total = pos + neg;
        if total <= 0.0 {
            return 0.0;
        }
        let p = pos / total;
        let q = neg / total;
        match self {
            Criterion::Gini => 1.0 - p * p - q * q,
            Criterion::Entropy => {
                let h = |r: f64| if r > 0.0 { -r * r.log2() } else { 0.0 };
                h(p) + h(q)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf {
        positive: bool,
        weight_pos: f64,
        weight_neg: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        /// Weighted impurity decrease achieved by this split.
        gain: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Candidate features drawn per node; all features when >= column count.
    pub features_per_split: usize,
    pub criterion: Criterion,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    root_weight: f64,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl DecisionTree {
    pub fn from_nodes(nodes: Vec<Node>, root_weight: f64) -> Self {
        DecisionTree { nodes, root_weight }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root_weight(&self) -> f64 {
        self.root_weight
    }

    /// Grows a tree on `rows` with per-row `weights` (rows with zero weight
    /// should be left out by the caller). The rng is consulted only when
    /// fewer features than columns are drawn per split.
    pub fn fit(
        x: ArrayView2<f64>,
        y: &[bool],
        weights: &[f64],
        rows: Vec<usize>,
        params: &TreeParams,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let levels = column_levels(x);
        Self::fit_with_levels(x, y, weights, rows, params, &levels, rng)
    }

    /// [`DecisionTree::fit`] with the result of [`column_levels`] supplied,
    /// so an ensemble computes it once.
    pub(crate) fn fit_with_levels(
        x: ArrayView2<f64>,
        y: &[bool],
        weights: &[f64],
        rows: Vec<usize>,
        params: &TreeParams,
        levels: &[Option<(f64, f64)>],
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let n_features = x.ncols();
        let mut nodes: Vec<Node> = Vec::new();
        let root_weight: f64 = rows.iter().map(|&r| weights[r]).sum();
        // (node slot, rows, depth)
        let mut stack = vec![(0usize, rows, 0usize)];
        nodes.push(Node::Leaf {
            positive: true,
            weight_pos: 0.0,
            weight_neg: 0.0,
        });
        let mut buffer: Vec<(f64, usize)> = Vec::new();

        while let Some((slot, node_rows, depth)) = stack.pop() {
            let (wp, wn) = node_rows.iter().fold((0.0, 0.0), |(p, n), &r| {
                if y[r] {
                    (p + weights[r], n)
                } else {
                    (p, n + weights[r])
                }
            });
            let leaf = Node::Leaf {
                positive: wp >= wn,
                weight_pos: wp,
                weight_neg: wn,
            };
            let depth_exhausted = params.max_depth.is_some_and(|d| depth >= d);
            if wp == 0.0 || wn == 0.0 || depth_exhausted || node_rows.len() < 2 * params.min_leaf.max(1) {
                nodes[slot] = leaf;
                continue;
            }

            let features: Vec<usize> = if params.features_per_split >= n_features {
                (0..n_features).collect()
            } else {
                let mut f = sample(rng, n_features, params.features_per_split.max(1)).into_vec();
                f.sort_unstable();
                f
            };

            let parent = params.criterion.impurity(wp, wn) * (wp + wn);
            let mut best: Option<Candidate> = None;
            for &feature in &features {
                if let Some((lo, hi)) = levels[feature] {
                    // a two-valued column has a single candidate threshold
                    let (mut lp, mut ln, mut left_count) = (0.0, 0.0, 0usize);
                    for &r in &node_rows {
                        if x[[r, feature]] == lo {
                            left_count += 1;
                            if y[r] {
                                lp += weights[r];
                            } else {
                                ln += weights[r];
                            }
                        }
                    }
                    let right_count = node_rows.len() - left_count;
                    if left_count == 0 || right_count == 0 || left_count < params.min_leaf || right_count < params.min_leaf {
                        continue;
                    }
                    let (rp, rn) = (wp - lp, wn - ln);
                    let gain = parent
                        - params.criterion.impurity(lp, ln) * (lp + ln)
                        - params.criterion.impurity(rp, rn) * (rp + rn);
                    if gain > best.as_ref().map_or(MIN_RELATIVE_GAIN * (wp + wn), |b| b.gain) {
                        best = Some(Candidate {
                            feature,
                            threshold: midpoint(lo, hi),
                            gain,
                        });
                    }
                    continue;
                }
                buffer.clear();
                buffer.extend(node_rows.iter().map(|&r| (x[[r, feature]], r)));
                buffer.sort_by(|a, b| a.0.total_cmp(&b.0));
                let (mut lp, mut ln) = (0.0, 0.0);
                for i in 0..buffer.len() - 1 {
                    let (value, r) = buffer[i];
                    if y[r] {
                        lp += weights[r];
                    } else {
                        ln += weights[r];
                    }
                    let next = buffer[i + 1].0;
                    if value == next {
                        continue;
                    }
                    let left_count = i + 1;
                    if left_count < params.min_leaf || buffer.len() - left_count < params.min_leaf {
                        continue;
                    }
                    let (rp, rn) = (wp - lp, wn - ln);
                    let gain = parent
                        - params.criterion.impurity(lp, ln) * (lp + ln)
                        - params.criterion.impurity(rp, rn) * (rp + rn);
                    if gain > best.as_ref().map_or(MIN_RELATIVE_GAIN * (wp + wn), |b| b.gain) {
                        best = Some(Candidate {
                            feature,
                            threshold: midpoint(value, next),
                            gain,
                        });
                    }
                }
            }

            let Some(split) = best else {
                nodes[slot] = leaf;
                continue;
            };
            let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = node_rows
                .iter()
                .partition(|&&r| x[[r, split.feature]] <= split.threshold);
            let left = nodes.len();
            let right = left + 1;
            nodes.push(leaf.clone());
            nodes.push(leaf);
            nodes[slot] = Node::Split {
                feature: split.feature,
                threshold: split.threshold,
                left,
                right,
                gain: split.gain,
            };
            stack.push((right, right_rows, depth + 1));
            stack.push((left, left_rows, depth + 1));
        }
        DecisionTree { nodes, root_weight }
    }

    pub fn predict_row(&self, row: ArrayView1<f64>) -> bool {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Leaf { positive, .. } => return *positive,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => idx = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    /// Adds each split's gain, as a fraction of the root weight, to its column.
    pub fn accumulate_importance(&self, out: &mut [f64]) {
        if self.root_weight <= 0.0 {
            return;
        }
        for node in &self.nodes {
            if let Node::Split { feature, gain, .. } = node {
                out[*feature] += gain / self.root_weight;
            }
        }
    }
}

/// For each column, its two distinct values in ascending order when it has
/// exactly two, else `None`.
pub(crate) fn column_levels(x: ArrayView2<f64>) -> Vec<Option<(f64, f64)>> {
    x.columns()
        .into_iter()
        .map(|col| {
            let first = *col.first()?;
            let mut other: Option<f64> = None;
            for &v in col {
                if v == first || other == Some(v) {
                    continue;
                }
                if other.is_some() || v.is_nan() {
                    return None;
                }
                other = Some(v);
            }
            let other = other?;
            Some(if first < other { (first, other) } else { (other, first) })
        })
        .collect()
}

/// Threshold between two adjacent distinct values that keeps `lo` on the left.
pub(crate) fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid < hi {
        mid
    } else {
        lo
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;
    use ndarray::arr2;

    fn params(max_depth: Option<usize>) -> TreeParams {
        TreeParams {
            max_depth,
            min_leaf: 1,
            features_per_split: usize::MAX,
            criterion: Criterion::Gini,
        }
    }

    #[test]
    fn impurity_values() {
        assert_eq!(Criterion::Gini.impurity(1.0, 1.0), 0.5);
        assert_eq!(Criterion::Entropy.impurity(1.0, 1.0), 1.0);
        assert_eq!(Criterion::Gini.impurity(3.0, 0.0), 0.0);
        assert_eq!(Criterion::Entropy.impurity(0.0, 0.0), 0.0);
    }

    #[test]
    fn learns_a_threshold() {
        let x = arr2(&[[0.0, 5.0], [1.0, 5.0], [2.0, 5.0], [3.0, 5.0]]);
        let y = [false, false, true, true];
        let tree = DecisionTree::fit(x.view(), &y, &[1.0; 4], (0..4).collect(), &params(None), &mut rng_from_seed(0));
        match &tree.nodes()[0] {
            Node::Split { feature, threshold, gain, .. } => {
                assert_eq!(*feature, 0);
                assert_eq!(*threshold, 1.5);
                assert!((gain - 2.0).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
        for (r, &label) in y.iter().enumerate() {
            assert_eq!(tree.predict_row(x.row(r)), label);
        }
        let mut imp = vec![0.0; 2];
        tree.accumulate_importance(&mut imp);
        assert_eq!(imp, vec![0.5, 0.0]);
    }

    #[test]
    fn depth_zero_is_weighted_majority() {
        let x = arr2(&[[0.0], [1.0], [2.0]]);
        let y = [true, false, false];
        let tree = DecisionTree::fit(x.view(), &y, &[5.0, 1.0, 1.0], vec![0, 1, 2], &params(Some(0)), &mut rng_from_seed(0));
        assert_eq!(tree.nodes().len(), 1);
        assert!(tree.predict_row(x.row(1)));
    }

    #[test]
    fn ties_go_to_lowest_feature() {
        // both columns separate the classes perfectly
        let x = arr2(&[[0.0, 0.0], [1.0, 1.0]]);
        let tree = DecisionTree::fit(x.view(), &[false, true], &[1.0, 1.0], vec![0, 1], &params(None), &mut rng_from_seed(0));
        assert!(matches!(tree.nodes()[0], Node::Split { feature: 0, .. }));
    }

    #[test]
    fn two_valued_columns_match_the_general_scan() {
        let mut rng = rng_from_seed(11);
        let n = 300;
        let x = ndarray::Array2::from_shape_fn((n, 6), |(_, c)| {
            let u: f64 = rand::Rng::random(&mut rng);
            if c < 4 { f64::from(u8::from(u < 0.3)) } else { u }
        });
        let y: Vec<bool> = (0..n).map(|r| x[[r, 0]] + x[[r, 4]] > 0.9).collect();
        let w: Vec<f64> = (0..n).map(|r| 1.0 + (r % 3) as f64).collect();
        let p = TreeParams { max_depth: Some(6), min_leaf: 2, ..params(None) };
        let fast = DecisionTree::fit(x.view(), &y, &w, (0..n).collect(), &p, &mut rng_from_seed(0));
        let slow = DecisionTree::fit_with_levels(x.view(), &y, &w, (0..n).collect(), &p, &[None; 6], &mut rng_from_seed(0));
        assert_eq!(fast.nodes().len(), slow.nodes().len());
        for (a, b) in fast.nodes().iter().zip(slow.nodes()) {
            match (a, b) {
                (Node::Split { feature: f, threshold: t, gain: g, .. }, Node::Split { feature: f2, threshold: t2, gain: g2, .. }) => {
                    assert_eq!((f, t), (f2, t2));
                    assert!((g - g2).abs() < 1e-9);
                }
                (Node::Leaf { positive: p, .. }, Node::Leaf { positive: p2, .. }) => assert_eq!(p, p2),
                other => panic!("{other:?}"),
            }
        }
        assert_eq!(column_levels(x.view())[..4], [Some((0.0, 1.0)); 4]);
        assert_eq!(column_levels(x.view())[4], None);
    }

    #[test]
    fn midpoint_stays_below_upper_value() {
        let lo = 1.0f64;
        let hi = f64::from_bits(lo.to_bits() + 1);
        assert_eq!(midpoint(lo, hi), lo);
        assert_eq!(midpoint(1.0, 2.0), 1.5);
    }
}
