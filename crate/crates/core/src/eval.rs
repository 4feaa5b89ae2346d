//! Confusion-matrix metrics, rank-based AUC and cross-validated model
//! selection.
//!
//! The positive class is "survived". A rate whose denominator is zero is
//! reported as 0 so degenerate folds never produce NaN.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::class_counts;
use crate::encode::EncodedMatrix;
use crate::error::{Error, Result};
use crate::imbalance::{ImbalanceMethod, ImbalancePlan};
use crate::models::{train, ModelKind, TrainConfig};
use crate::seed::derive_seed;
use crate::split::{kfold_indices, training_rows};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

fn rate(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// `tp / (tp + fn)`.
    pub fn sensitivity(&self) -> f64 {
        rate(self.tp, self.tp + self.fn_)
    }

    /// `tn / (tn + fp)`.
    pub fn specificity(&self) -> f64 {
        rate(self.tn, self.tn + self.fp)
    }

    pub fn g_mean(&self) -> f64 {
        (self.sensitivity() * self.specificity()).sqrt()
    }
}

pub fn confusion(truth: &[bool], predicted: &[bool]) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return Err(Error::LengthMismatch {
            left: truth.len(),
            right: predicted.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::invalid("confusion matrix", "no rows to evaluate"));
    }
    let mut cm = ConfusionMatrix::default();
    for (&t, &p) in truth.iter().zip(predicted) {
        match (t, p) {
            (true, true) => cm.tp += 1,
            (false, false) => cm.tn += 1,
            (false, true) => cm.fp += 1,
            (true, false) => cm.fn_ += 1,
        }
    }
    Ok(cm)
}

fn check_scores(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: labels.len(),
        });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("scores", "scores must be finite"));
    }
    let (pos, neg) = class_counts(labels);
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    Ok(())
}

/// Area under the ROC curve from the Mann-Whitney rank statistic, with
/// tied scores sharing their average rank (half credit per tied pair).
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_scores(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // ranks are doubled so tie averages stay integral
    let mut twice_rank_sum: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1..=j+1 average to (i + j + 2) / 2
        let twice_avg = (i + j + 2) as u64;
        for &r in &order[i..=j] {
            if labels[r] {
                twice_rank_sum += twice_avg;
            }
        }
        i = j + 1;
    }
    let (pos, neg) = class_counts(labels);
    let (p, n) = (pos as u64, neg as u64);
    let twice_u = twice_rank_sum - p * (p + 1);
    Ok(twice_u as f64 / (2 * p * n) as f64)
}

/// ROC vertices `(false positive rate, true positive rate)` from (0, 0) to
/// (1, 1), one per distinct score in descending order.
pub fn roc_points(scores: &[f64], labels: &[bool]) -> Result<Vec<(f64, f64)>> {
    check_scores(scores, labels)?;
    let (pos, neg) = class_counts(labels);
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    for (idx, &r) in order.iter().enumerate() {
        if labels[r] {
            tp += 1;
        } else {
            fp += 1;
        }
        let last_of_tie = order.get(idx + 1).is_none_or(|&next| scores[next] != scores[r]);
        if last_of_tie {
            points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
        }
    }
    Ok(points)
}

/// Threshold-dependent and ranking metrics for one set of predictions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub confusion: ConfusionMatrix,
    pub sensitivity: f64,
    pub specificity: f64,
    pub g_mean: f64,
    pub auc: f64,
    pub threshold: f64,
}

/// Scores probabilities against labels; positive iff `p >= threshold`.
pub fn evaluate(probabilities: &[f64], labels: &[bool], threshold: f64) -> Result<Metrics> {
    let predicted = crate::models::classify(probabilities, threshold)?;
    let cm = confusion(labels, &predicted)?;
    Ok(Metrics {
        confusion: cm,
        sensitivity: cm.sensitivity(),
        specificity: cm.specificity(),
        g_mean: cm.g_mean(),
        auc: auc(probabilities, labels)?,
        threshold,
    })
}

/// Test-set metrics tagged with what produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub cohort: String,
    pub model: ModelKind,
    pub imbalance: ImbalanceMethod,
    #[serde(flatten)]
    pub metrics: Metrics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMetric {
    #[default]
    Auc,
    Gmean,
}

impl SelectionMetric {
    pub fn name(self) -> &'static str {
        match self {
            SelectionMetric::Auc => "auc",
            SelectionMetric::Gmean => "gmean",
        }
    }

    pub fn pick(self, m: &Metrics) -> f64 {
        match self {
            SelectionMetric::Auc => m.auc,
            SelectionMetric::Gmean => m.g_mean,
        }
    }
}

impl fmt::Display for SelectionMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SelectionMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auc" => Ok(SelectionMetric::Auc),
            "gmean" | "g_mean" => Ok(SelectionMetric::Gmean),
            _ => Err(Error::invalid("selection metric", format!("`{s}` (expected auc or gmean)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOptions {
    pub k: usize,
    pub seed: u64,
    pub metric: SelectionMetric,
    pub threshold: f64,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            k: 5,
            seed: 0,
            metric: SelectionMetric::Auc,
            threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldScore {
    pub grid_index: usize,
    pub fold: usize,
    pub auc: f64,
    pub g_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub metric: SelectionMetric,
    /// Folds that were evaluated, in order; single-class folds are absent.
    pub folds_used: Vec<usize>,
    /// One row per (grid point, evaluated fold), grid-major.
    pub table: Vec<FoldScore>,
    /// Mean selection metric per grid point.
    pub means: Vec<f64>,
    pub selected: usize,
    pub selected_config: TrainConfig,
}

impl CvResult {
    /// Per-fold table as comma-delimited text.
    pub fn to_delimited(&self, grid: &[TrainConfig]) -> String {
        let mut out = String::from("grid_index,model,fold,auc,g_mean\n");
        for row in &self.table {
            out.push_str(&format!(
                "{},{},{},{:.6},{:.6}\n",
                row.grid_index,
                grid[row.grid_index].kind(),
                row.fold,
                row.auc,
                row.g_mean
            ));
        }
        out
    }
}

/// Copies of `cfg` and `plan` whose seeds are specific to one fold.
fn fold_seeds(cfg: &TrainConfig, plan: &ImbalancePlan, fold: usize) -> (TrainConfig, ImbalancePlan) {
    let stage = format!("fold-{fold}");
    let mut cfg = cfg.clone();
    cfg.seed = derive_seed(cfg.seed, &stage);
    let mut plan = plan.clone();
    plan.seed = derive_seed(plan.seed, &stage);
    (cfg, plan)
}

/// k-fold model selection. Each grid point trains on k-1 folds (with the
/// imbalance plan applied to those training rows only) and is scored on the
/// held-out fold. The grid point with the highest mean metric wins; ties go
/// to the earliest. Folds whose training or held-out rows hold a single
/// class are skipped with a warning.
pub fn cross_validate(
    matrix: &EncodedMatrix,
    grid: &[TrainConfig],
    plan: &ImbalancePlan,
    opts: &CvOptions,
) -> Result<CvResult> {
    if grid.is_empty() {
        return Err(Error::invalid("model grid", "grid is empty"));
    }
    for cfg in grid {
        cfg.params.validate()?;
    }
    plan.validate()?;
    let labels = matrix.require_labels()?;
    let fold_seed = derive_seed(opts.seed, "cv-folds");
    let folds = kfold_indices(labels, opts.k, fold_seed, true).or_else(|_| kfold_indices(labels, opts.k, fold_seed, false))?;

    let mut usable = Vec::new();
    for f in 0..folds.len() {
        let held: Vec<bool> = folds[f].iter().map(|&r| labels[r]).collect();
        let train: Vec<bool> = training_rows(&folds, f).iter().map(|&r| labels[r]).collect();
        let (hp, hn) = class_counts(&held);
        let (tp, tn) = class_counts(&train);
        if hp == 0 || hn == 0 || tp == 0 || tn == 0 {
            log::warn!("skipping cross-validation fold {f}: a class is absent");
        } else {
            usable.push(f);
        }
    }
    if usable.is_empty() {
        return Err(Error::AllFoldsSkipped);
    }

    let jobs: Vec<(usize, usize)> = (0..grid.len()).flat_map(|g| usable.iter().map(move |&f| (g, f))).collect();
    let table = jobs
        .par_iter()
        .map(|&(g, f)| {
            let (cfg, fold_plan) = fold_seeds(&grid[g], plan, f);
            let train_matrix = matrix.select_rows(&training_rows(&folds, f));
            let held = matrix.select_rows(&folds[f]);
            let (rows, weights) = fold_plan.prepare(&train_matrix)?;
            let model = train(&rows, &weights, &cfg)?;
            let probs = model.predict_proba(&held)?;
            let m = evaluate(&probs, held.require_labels()?, opts.threshold)?;
            Ok(FoldScore {
                grid_index: g,
                fold: f,
                auc: m.auc,
                g_mean: m.g_mean,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let means: Vec<f64> = (0..grid.len())
        .map(|g| {
            let rows: Vec<&FoldScore> = table.iter().filter(|r| r.grid_index == g).collect();
            rows.iter()
                .map(|r| match opts.metric {
                    SelectionMetric::Auc => r.auc,
                    SelectionMetric::Gmean => r.g_mean,
                })
                .sum::<f64>()
                / rows.len() as f64
        })
        .collect();
    let mut selected = 0;
    for (g, &m) in means.iter().enumerate() {
        if m > means[selected] {
            selected = g;
        }
    }
    Ok(CvResult {
        metric: opts.metric,
        folds_used: usable,
        table,
        means,
        selected,
        selected_config: grid[selected].clone(),
    })
}
