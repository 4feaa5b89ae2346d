//! Declarative experiment files (TOML).
//!
//! ```toml
//! seed = 7
//! cohorts = ["white", "hispanic", "mixed"]
//! required = ["age", "number_of_tumors"]
//!
//! [data]
//! kind = "synthetic"
//! n_rows = 20000
//!
//! [[models]]
//! kind = "logistic"
//! l2 = 0.0001
//!
//! [[imbalance]]
//! method = "undersample"
//! ```
//!
//! Relative data and schema paths resolve against the directory holding the
//! experiment file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{Cohort, CohortRule, LabelRule};
use crate::error::{Error, Result};
use crate::eval::SelectionMetric;
use crate::imbalance::{ImbalanceMethod, ImbalancePlan};
use crate::mice::ImputePlan;
use crate::models::{ModelKind, ModelParams, TrainConfig};
use crate::synth::SynthSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// Generated records. Without an explicit `spec` the registry-shaped
    /// default is used, seeded from the master seed.
    Synthetic {
        #[serde(default = "default_synth_rows")]
        n_rows: usize,
        /// Multiplies every generator shift and tilt.
        #[serde(default = "one")]
        signal_scale: f64,
        #[serde(default)]
        spec: Option<SynthSpec>,
    },
    FixedWidth { path: PathBuf, schema: PathBuf },
    Delimited { path: PathBuf, schema: PathBuf },
}

fn default_synth_rows() -> usize {
    20000
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub data: DataSource,
    #[serde(default = "all_cohorts")]
    pub cohorts: Vec<Cohort>,
    #[serde(default)]
    pub label: LabelRule,
    #[serde(default)]
    pub cohort_rule: CohortRule,
    /// Rows missing any of these fields are deleted.
    #[serde(default = "default_required")]
    pub required: Vec<String>,
    /// Predictors; all non-bookkeeping fields when absent.
    #[serde(default)]
    pub features: Option<Vec<String>>,
    #[serde(default)]
    pub impute: ImputePlan,
    /// Fit imputation on all rows before splitting instead of on the
    /// training rows only.
    #[serde(default)]
    pub impute_before_split: bool,
    #[serde(default = "default_grid")]
    pub models: Vec<TrainConfig>,
    #[serde(default = "default_plans")]
    pub imbalance: Vec<ImbalancePlan>,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub metric: SelectionMetric,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    /// Report directory; the command line may override it.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn all_cohorts() -> Vec<Cohort> {
    Cohort::ALL.to_vec()
}

fn default_required() -> Vec<String> {
    vec!["age".into(), "number_of_tumors".into()]
}

fn default_grid() -> Vec<TrainConfig> {
    ModelKind::ALL
        .into_iter()
        .map(|k| TrainConfig::new(ModelParams::default_for(k), 0))
        .collect()
}

fn default_plans() -> Vec<ImbalancePlan> {
    vec![ImbalancePlan::new(ImbalanceMethod::None)]
}

fn default_k() -> usize {
    5
}

fn default_test_fraction() -> f64 {
    0.2
}

fn default_threshold() -> f64 {
    0.5
}

fn default_top_k() -> usize {
    7
}

impl ExperimentConfig {
    /// A configuration over synthetic data with every default.
    pub fn synthetic(n_rows: usize, seed: u64) -> Self {
        toml::from_str::<ExperimentConfig>(&format!("seed = {seed}\n[data]\nkind = \"synthetic\"\nn_rows = {n_rows}\n"))
            .expect("built-in configuration parses")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a file and resolves its relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = ExperimentConfig::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        match &mut cfg.data {
            DataSource::FixedWidth { path, schema } | DataSource::Delimited { path, schema } => {
                *path = base.join(&*path);
                *schema = base.join(&*schema);
            }
            DataSource::Synthetic { .. } => {}
        }
        if let Some(out) = &mut cfg.output_dir {
            *out = base.join(&*out);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.cohorts.is_empty() {
            return bad("at least one cohort is required".into());
        }
        if self.models.is_empty() {
            return bad("the model grid is empty".into());
        }
        if self.imbalance.is_empty() {
            return bad("at least one imbalance plan is required".into());
        }
        let mut methods: Vec<ImbalanceMethod> = self.imbalance.iter().map(|p| p.method).collect();
        methods.sort_by_key(|m| m.name());
        methods.dedup();
        if methods.len() != self.imbalance.len() {
            return bad("each imbalance method may appear once".into());
        }
        if self.k < 2 {
            return bad(format!("k = {} (need at least 2 folds)", self.k));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return bad(format!("test_fraction {} is not in (0, 1)", self.test_fraction));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return bad(format!("threshold {} is not in [0, 1]", self.threshold));
        }
        if self.top_k == 0 {
            return bad("top_k must be at least 1".into());
        }
        if let DataSource::Synthetic {
            n_rows,
            signal_scale,
            spec,
        } = &self.data
        {
            if *n_rows == 0 && spec.is_none() {
                return bad("synthetic n_rows must be positive".into());
            }
            if !signal_scale.is_finite() {
                return bad("signal_scale must be finite".into());
            }
            if let Some(spec) = spec {
                spec.validate()?;
            }
        }
        for cfg in &self.models {
            cfg.params.validate()?;
        }
        for plan in &self.imbalance {
            plan.validate()?;
        }
        self.label.validate()?;
        self.cohort_rule.validate()?;
        Ok(())
    }

    /// Distinct model kinds in first-appearance order.
    pub fn kinds(&self) -> Vec<ModelKind> {
        let mut out = Vec::new();
        for cfg in &self.models {
            if !out.contains(&cfg.kind()) {
                out.push(cfg.kind());
            }
        }
        out
    }

    /// Canonical JSON rendering, the input to [`ExperimentConfig::hash`].
    pub fn canonical(&self) -> String {
        serde_json::to_string(self).expect("configuration serializes")
    }

    /// Hex SHA-256 of the canonical rendering.
    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let cfg = ExperimentConfig::from_toml("seed = 1\n[data]\nkind = \"synthetic\"\n").unwrap();
        assert_eq!(cfg.k, 5);
        assert_eq!(cfg.test_fraction, 0.2);
        assert_eq!(cfg.cohorts, Cohort::ALL.to_vec());
        assert_eq!(cfg.kinds(), ModelKind::ALL.to_vec());
        assert_eq!(cfg.imbalance.len(), 1);
        assert_eq!(cfg.top_k, 7);
        assert!(matches!(cfg.data, DataSource::Synthetic { n_rows: 20000, .. }));
    }

    #[test]
    fn grid_and_plans() {
        let text = r#"
seed = 3
cohorts = ["hispanic"]
[data]
kind = "fixed_width"
path = "records.txt"
schema = "records.schema"
[[models]]
kind = "logistic"
l2 = 0.01
[[models]]
kind = "forest"
n_trees = 10
max_depth = 8
[[imbalance]]
method = "none"
[[imbalance]]
method = "weights"
factor = 5.0
"#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.kinds(), vec![ModelKind::Logistic, ModelKind::Forest]);
        assert_eq!(cfg.imbalance[1].method, ImbalanceMethod::CostSensitive);
        let again = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.hash(), again.hash());
        assert_eq!(cfg.hash().len(), 64);
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            "seed = 1\n",
            "seed = 1\ncohorts = []\n[data]\nkind = \"synthetic\"\n",
            "seed = 1\nk = 1\n[data]\nkind = \"synthetic\"\n",
            "seed = 1\ntest_fraction = 1.0\n[data]\nkind = \"synthetic\"\n",
            "seed = 1\nbogus = 2\n[data]\nkind = \"synthetic\"\n",
            "seed = 1\ncohorts = [\"asian\"]\n[data]\nkind = \"synthetic\"\n",
            "seed = 1\n[data]\nkind = \"synthetic\"\n[[models]]\nkind = \"forest\"\nn_trees = 0\n",
            "seed = 1\n[data]\nkind = \"synthetic\"\n[[imbalance]]\nmethod = \"none\"\n[[imbalance]]\nmethod = \"none\"\n",
        ] {
            let err = ExperimentConfig::from_toml(text).unwrap_err();
            assert!(err.is_config_error(), "{text}: {err}");
        }
    }
}
