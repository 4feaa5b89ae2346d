//! Feature importance aggregated over one-hot columns, and ranked tables.
//!
//! Per-column scores are |coefficient| for logistic regression and the
//! impurity decrease recorded by the tree learners. A feature's score is the
//! sum over its columns, and feature scores are normalized to sum to one.

use serde::{Deserialize, Serialize};

use crate::encode::FeatureMap;
use crate::error::{Error, Result};
use crate::models::{Learned, ModelKind, TrainedModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub model: ModelKind,
    /// `(feature, score)` in feature-map order.
    pub scores: Vec<(String, f64)>,
}

impl FeatureImportance {
    /// Features by descending score; equal scores are ordered by name.
    pub fn ranked(&self) -> Vec<(String, f64)> {
        let mut out = self.scores.clone();
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        out
    }

    pub fn score(&self, feature: &str) -> Option<f64> {
        self.scores.iter().find(|(n, _)| n == feature).map(|&(_, s)| s)
    }
}

/// Importance per original feature. MLP models have none.
pub fn importance(model: &TrainedModel, map: &FeatureMap) -> Result<FeatureImportance> {
    if model.fingerprint() != &map.fingerprint() {
        return Err(Error::FingerprintMismatch);
    }
    let per_column: Vec<f64> = match model.learned() {
        Learned::Logistic(m) => m.coefficients().iter().map(|c| c.abs()).collect(),
        Learned::Forest(_) | Learned::Adaboost(_) => model.column_importance().expect("tree learners record importance"),
        Learned::Mlp(_) => return Err(Error::UnsupportedKind(ModelKind::Mlp)),
    };
    Ok(FeatureImportance {
        model: model.kind(),
        scores: aggregate(&per_column, map),
    })
}

/// Sums column scores over each feature's range and normalizes. When every
/// score is zero the features share the mass equally.
pub fn aggregate(per_column: &[f64], map: &FeatureMap) -> Vec<(String, f64)> {
    let sums: Vec<f64> = map.features().iter().map(|s| per_column[s.range()].iter().sum()).collect();
    let total: f64 = sums.iter().sum();
    let n = sums.len().max(1) as f64;
    map.features()
        .iter()
        .zip(sums)
        .map(|(slot, s)| (slot.name.clone(), if total > 0.0 { s / total } else { 1.0 / n }))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankColumn {
    pub label: String,
    pub features: Vec<String>,
}

/// Top-k feature names per labeled importance, side by side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    pub columns: Vec<RankColumn>,
}

/// Builds a table with one column per `(label, importance)`. `top_k`
/// larger than the feature count is truncated.
pub fn rank_table(importances: &[(String, FeatureImportance)], top_k: usize) -> Result<RankTable> {
    if importances.is_empty() {
        return Err(Error::invalid("rank table", "no importances given"));
    }
    let columns = importances
        .iter()
        .map(|(label, imp)| RankColumn {
            label: label.clone(),
            features: imp.ranked().into_iter().take(top_k).map(|(n, _)| n).collect(),
        })
        .collect();
    Ok(RankTable { columns })
}

impl RankTable {
    fn depth(&self) -> usize {
        self.columns.iter().map(|c| c.features.len()).max().unwrap_or(0)
    }

    /// Aligned text with a rank column and one column per label.
    pub fn to_text(&self) -> String {
        let mut header = vec!["Rank".to_string()];
        header.extend(self.columns.iter().map(|c| c.label.clone()));
        let mut rows = vec![header];
        for i in 0..self.depth() {
            let mut row = vec![(i + 1).to_string()];
            row.extend(self.columns.iter().map(|c| c.features.get(i).cloned().unwrap_or_default()));
            rows.push(row);
        }
        aligned(&rows)
    }

    pub fn to_delimited(&self) -> String {
        let mut out = String::from("rank");
        for c in &self.columns {
            out.push(',');
            out.push_str(&csv_cell(&c.label));
        }
        out.push('\n');
        for i in 0..self.depth() {
            out.push_str(&(i + 1).to_string());
            for c in &self.columns {
                out.push(',');
                out.push_str(&csv_cell(c.features.get(i).map_or("", String::as_str)));
            }
            out.push('\n');
        }
        out
    }
}

/// Quotes a cell when it contains a comma, quote or newline.
pub fn csv_cell(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Left-aligned columns separated by two spaces, with a rule under the
/// header row.
pub fn aligned(rows: &[Vec<String>]) -> String {
    let n_cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..n_cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        let line: Vec<String> = (0..n_cols)
            .map(|c| format!("{:<w$}", row.get(c).map_or("", String::as_str), w = widths[c]))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
        if i == 0 {
            let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
            out.push_str(&rule.join("  "));
            out.push('\n');
        }
    }
    out
}
