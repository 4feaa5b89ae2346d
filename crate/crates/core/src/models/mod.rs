//! Four classifiers behind one contract: logistic regression, random
//! forest, AdaBoost over decision stumps, and a multilayer perceptron.
//! Every learner accepts per-row training weights.

use std::fmt;
use std::str::FromStr;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::encode::{EncodedMatrix, Fingerprint};
use crate::error::{Error, Result};

pub mod adaboost;
pub mod forest;
pub mod io;
pub mod logistic;
pub mod mlp;
pub mod tree;

pub use adaboost::{AdaBoostModel, AdaBoostParams, Stump};
pub use forest::{ForestModel, ForestParams};
pub use io::{load_model, load_model_as, save_model};
pub use logistic::{LogisticModel, LogisticParams};
pub use mlp::{DenseLayer, MlpModel, MlpParams};
pub use tree::{Criterion, DecisionTree, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Logistic,
    Forest,
    Adaboost,
    Mlp,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Logistic, ModelKind::Forest, ModelKind::Adaboost, ModelKind::Mlp];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Logistic => "logistic",
            ModelKind::Forest => "forest",
            ModelKind::Adaboost => "adaboost",
            ModelKind::Mlp => "mlp",
        }
    }

    /// Row label used in report tables.
    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::Logistic => "Logistic Regression",
            ModelKind::Forest => "Random Forest",
            ModelKind::Adaboost => "AdaBoost",
            ModelKind::Mlp => "Neural Network",
        }
    }

    pub(crate) fn tag(self) -> u8 {
        match self {
            ModelKind::Logistic => 1,
            ModelKind::Forest => 2,
            ModelKind::Adaboost => 3,
            ModelKind::Mlp => 4,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        ModelKind::ALL.into_iter().find(|k| k.tag() == tag)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid("model kind", format!("`{s}` (expected logistic, forest, adaboost or mlp)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelParams {
    Logistic(LogisticParams),
    Forest(ForestParams),
    Adaboost(AdaBoostParams),
    Mlp(MlpParams),
}

impl ModelParams {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelParams::Logistic(_) => ModelKind::Logistic,
            ModelParams::Forest(_) => ModelKind::Forest,
            ModelParams::Adaboost(_) => ModelKind::Adaboost,
            ModelParams::Mlp(_) => ModelKind::Mlp,
        }
    }

    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Logistic => ModelParams::Logistic(LogisticParams::default()),
            ModelKind::Forest => ModelParams::Forest(ForestParams::default()),
            ModelKind::Adaboost => ModelParams::Adaboost(AdaBoostParams::default()),
            ModelKind::Mlp => ModelParams::Mlp(MlpParams::default()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelParams::Logistic(p) => p.validate(),
            ModelParams::Forest(p) => p.validate(),
            ModelParams::Adaboost(p) => p.validate(),
            ModelParams::Mlp(p) => p.validate(),
        }
    }
}

/// Hyperparameters plus the seed for one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(flatten)]
    pub params: ModelParams,
    #[serde(default)]
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(params: ModelParams, seed: u64) -> Self {
        TrainConfig { params, seed }
    }

    pub fn kind(&self) -> ModelKind {
        self.params.kind()
    }
}

/// Nonnegative per-row training weights, not all zero.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("weights", "weights must be finite and nonnegative"));
        }
        if !weights.iter().any(|&w| w > 0.0) {
            return Err(Error::invalid("weights", "weights must not all be zero"));
        }
        Ok(WeightVector(weights))
    }

    pub fn uniform(n: usize) -> Self {
        WeightVector(vec![1.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Learned {
    Logistic(LogisticModel),
    Forest(ForestModel),
    Adaboost(AdaBoostModel),
    Mlp(MlpModel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    fingerprint: Fingerprint,
    n_cols: usize,
    learned: Learned,
}

impl TrainedModel {
    pub fn new(fingerprint: Fingerprint, n_cols: usize, learned: Learned) -> Self {
        TrainedModel {
            fingerprint,
            n_cols,
            learned,
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self.learned {
            Learned::Logistic(_) => ModelKind::Logistic,
            Learned::Forest(_) => ModelKind::Forest,
            Learned::Adaboost(_) => ModelKind::Adaboost,
            Learned::Mlp(_) => ModelKind::Mlp,
        }
    }

    pub fn fingerprint(&self) -> &Fingerprint {
        &self.fingerprint
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn learned(&self) -> &Learned {
        &self.learned
    }

    fn check_matrix(&self, matrix: &EncodedMatrix) -> Result<()> {
        if matrix.n_cols() != self.n_cols {
            return Err(Error::DimensionMismatch {
                expected: self.n_cols,
                found: matrix.n_cols(),
            });
        }
        if matrix.map().fingerprint() != self.fingerprint {
            return Err(Error::FingerprintMismatch);
        }
        Ok(())
    }

    /// Probability of the positive class for each row.
    pub fn predict_proba(&self, matrix: &EncodedMatrix) -> Result<Vec<f64>> {
        self.check_matrix(matrix)?;
        Ok(self.predict_values(matrix.values().view()))
    }

    /// Same as [`TrainedModel::predict_proba`] without the feature-map check.
    pub fn predict_values(&self, x: ArrayView2<f64>) -> Vec<f64> {
        match &self.learned {
            Learned::Logistic(m) => m.predict_proba(x),
            Learned::Forest(m) => m.predict_proba(x),
            Learned::Adaboost(m) => m.predict_proba(x),
            Learned::Mlp(m) => m.predict_proba(x),
        }
    }

    pub fn classify(&self, matrix: &EncodedMatrix, threshold: f64) -> Result<Vec<bool>> {
        classify(&self.predict_proba(matrix)?, threshold)
    }

    /// Per-column importance for the tree learners; `None` otherwise.
    pub fn column_importance(&self) -> Option<Vec<f64>> {
        match &self.learned {
            Learned::Forest(m) => Some(m.column_importance(self.n_cols)),
            Learned::Adaboost(m) => Some(m.column_importance(self.n_cols)),
            Learned::Logistic(_) | Learned::Mlp(_) => None,
        }
    }
}

/// Positive iff probability >= threshold.
pub fn classify(probabilities: &[f64], threshold: f64) -> Result<Vec<bool>> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::invalid("threshold", format!("{threshold} is outside [0, 1]")));
    }
    Ok(probabilities.iter().map(|&p| p >= threshold).collect())
}

/// Trains the learner named by `cfg` on a labeled matrix.
pub fn train(matrix: &EncodedMatrix, weights: &WeightVector, cfg: &TrainConfig) -> Result<TrainedModel> {
    cfg.params.validate()?;
    let labels = matrix.require_labels()?;
    if weights.len() != matrix.n_rows() {
        return Err(Error::LengthMismatch {
            left: weights.len(),
            right: matrix.n_rows(),
        });
    }
    if !labels.iter().any(|&l| l) || labels.iter().all(|&l| l) {
        return Err(Error::SingleClass);
    }
    let x = matrix.values().view();
    let w = weights.as_slice();
    let learned = match &cfg.params {
        ModelParams::Logistic(p) => Learned::Logistic(LogisticModel::fit(x, labels, w, p).0),
        ModelParams::Forest(p) => Learned::Forest(ForestModel::fit(x, labels, w, p, cfg.seed)),
        ModelParams::Adaboost(p) => Learned::Adaboost(AdaBoostModel::fit(x, labels, w, p)?),
        ModelParams::Mlp(p) => Learned::Mlp(MlpModel::fit(x, labels, w, p, cfg.seed)),
    };
    Ok(TrainedModel::new(matrix.map().fingerprint(), matrix.n_cols(), learned))
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
pub(crate) fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}
