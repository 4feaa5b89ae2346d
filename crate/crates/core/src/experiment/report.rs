//! Report tables: AUC per model and cohort, top-k rankings, G-mean under
//! each imbalance plan, and G-mean with AUC side by side. Every table is
//! written as aligned text and as comma-delimited text.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::run::{JobResult, RunManifest};
use crate::dataset::Cohort;
use crate::error::{Error, Result};
use crate::imbalance::ImbalanceMethod;
use crate::models::ModelKind;
use crate::ranking::{aligned, csv_cell};

/// Marker for a ranking cell a model cannot provide.
pub const UNAVAILABLE: &str = "unavailable";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn to_text(&self) -> String {
        let mut all = vec![self.header.clone()];
        all.extend(self.rows.iter().cloned());
        aligned(&all)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in std::iter::once(&self.header).chain(&self.rows) {
            let cells: Vec<String> = row.iter().map(|c| csv_cell(c)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// One rendered table in both forms, in text precision and full precision.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportPair {
    pub name: &'static str,
    pub text: Table,
    pub csv: Table,
}

/// "Undersampled Random Forest", "Cost-Sensitive AdaBoost", ...
pub fn row_label(kind: ModelKind, method: ImbalanceMethod) -> String {
    match method {
        ImbalanceMethod::None => kind.display_name().to_string(),
        ImbalanceMethod::Undersample => format!("Undersampled {}", kind.display_name()),
        ImbalanceMethod::CostSensitive => format!("Cost-Sensitive {}", kind.display_name()),
    }
}

fn cohort_title(c: Cohort) -> String {
    let name = c.name();
    let mut chars = name.chars();
    match chars.next() {
        Some(first) => first.to_ascii_uppercase().to_string() + chars.as_str(),
        None => String::new(),
    }
}

/// The plan whose results fill the AUC and ranking tables: no remedy when
/// it was run, otherwise the first plan.
pub fn baseline_method(methods: &[ImbalanceMethod]) -> ImbalanceMethod {
    if methods.contains(&ImbalanceMethod::None) {
        ImbalanceMethod::None
    } else {
        methods[0]
    }
}

struct View<'a> {
    results: &'a [JobResult],
    cohorts: &'a [Cohort],
    kinds: &'a [ModelKind],
    methods: &'a [ImbalanceMethod],
}

impl View<'_> {
    fn find(&self, cohort: Cohort, kind: ModelKind, method: ImbalanceMethod) -> Option<&JobResult> {
        self.results
            .iter()
            .find(|r| r.cohort == cohort && r.model == kind && r.imbalance == method)
    }

    fn metric_table(&self, name: &'static str, pick: fn(&JobResult) -> f64, baseline_only: bool) -> ReportPair {
        let mut text = Table {
            header: vec!["Model".into()],
            rows: vec![],
        };
        let mut csv = Table {
            header: vec!["model".into(), "imbalance".into()],
            rows: vec![],
        };
        text.header.extend(self.cohorts.iter().map(|&c| cohort_title(c)));
        csv.header.extend(self.cohorts.iter().map(|c| c.name().to_string()));
        let base = baseline_method(self.methods);
        for &kind in self.kinds {
            for &method in self.methods {
                if baseline_only && method != base {
                    continue;
                }
                let label = if baseline_only { kind.display_name().to_string() } else { row_label(kind, method) };
                let mut t = vec![label];
                let mut c = vec![kind.name().to_string(), method.name().to_string()];
                for &cohort in self.cohorts {
                    let value = self.find(cohort, kind, method).map(pick);
                    t.push(value.map_or_else(|| "-".into(), |v| format!("{v:.3}")));
                    c.push(value.map_or_else(String::new, |v| format!("{v:.6}")));
                }
                text.rows.push(t);
                csv.rows.push(c);
            }
        }
        ReportPair { name, text, csv }
    }

    fn gmean_auc(&self) -> ReportPair {
        let mut text = Table {
            header: vec!["Model".into()],
            rows: vec![],
        };
        let mut csv = Table {
            header: vec!["model".into(), "imbalance".into()],
            rows: vec![],
        };
        for &c in self.cohorts {
            text.header.push(format!("{} G-mean", cohort_title(c)));
            text.header.push(format!("{} AUC", cohort_title(c)));
            csv.header.push(format!("{}_gmean", c.name()));
            csv.header.push(format!("{}_auc", c.name()));
        }
        for &kind in self.kinds {
            for &method in self.methods {
                let mut t = vec![row_label(kind, method)];
                let mut c = vec![kind.name().to_string(), method.name().to_string()];
                for &cohort in self.cohorts {
                    let r = self.find(cohort, kind, method);
                    for v in [r.map(|r| r.metrics.g_mean), r.map(|r| r.metrics.auc)] {
                        t.push(v.map_or_else(|| "-".into(), |v| format!("{v:.3}")));
                        c.push(v.map_or_else(String::new, |v| format!("{v:.6}")));
                    }
                }
                text.rows.push(t);
                csv.rows.push(c);
            }
        }
        ReportPair {
            name: "gmean_auc",
            text,
            csv,
        }
    }

    fn rankings(&self, top_k: usize) -> ReportPair {
        let base = baseline_method(self.methods);
        let mut text = Table {
            header: vec!["Rank".into()],
            rows: vec![],
        };
        let mut csv = Table {
            header: vec!["rank".into()],
            rows: vec![],
        };
        let mut columns: Vec<Vec<String>> = Vec::new();
        for &kind in self.kinds.iter().filter(|&&k| k != ModelKind::Mlp) {
            for &cohort in self.cohorts {
                text.header.push(format!("{} / {}", kind.display_name(), cohort_title(cohort)));
                csv.header.push(format!("{}_{}", kind.name(), cohort.name()));
                let names = self
                    .find(cohort, kind, base)
                    .and_then(|r| r.ranking.as_ref())
                    .map(|rank| rank.iter().take(top_k).map(|(n, _)| n.clone()).collect())
                    .unwrap_or_default();
                columns.push(names);
            }
        }
        let depth = columns.iter().map(Vec::len).max().unwrap_or(0);
        for i in 0..depth {
            let mut row = vec![(i + 1).to_string()];
            row.extend(columns.iter().map(|c| c.get(i).cloned().unwrap_or_default()));
            text.rows.push(row.clone());
            csv.rows.push(row);
        }
        ReportPair {
            name: "rankings",
            text,
            csv,
        }
    }
}

/// The four report tables of a run, in file order: `auc`, `rankings`,
/// `gmean`, `gmean_auc`.
pub fn run_reports(
    results: &[JobResult],
    cohorts: &[Cohort],
    kinds: &[ModelKind],
    methods: &[ImbalanceMethod],
    top_k: usize,
) -> Vec<ReportPair> {
    let view = View {
        results,
        cohorts,
        kinds,
        methods,
    };
    vec![
        view.metric_table("auc", |r| r.metrics.auc, true),
        view.rankings(top_k),
        view.metric_table("gmean", |r| r.metrics.g_mean, false),
        view.gmean_auc(),
    ]
}

/// Every metric of every job, full precision.
pub fn metrics_csv(results: &[JobResult]) -> String {
    let mut out = String::from("cohort,model,imbalance,selected_grid_index,threshold,tp,tn,fp,fn,sensitivity,specificity,g_mean,auc\n");
    for r in results {
        let m = &r.metrics;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{:.6},{:.6},{:.6},{:.6}\n",
            r.cohort,
            r.model,
            r.imbalance,
            r.selected_grid_index,
            m.threshold,
            m.confusion.tp,
            m.confusion.tn,
            m.confusion.fp,
            m.confusion.fn_,
            m.sensitivity,
            m.specificity,
            m.g_mean,
            m.auc
        ));
    }
    out
}

/// Side-by-side comparison of several runs.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub auc: Table,
    pub gmean: Table,
    pub rankings: Table,
}

/// Lines up the cohorts of several runs that share one model grid. Each
/// (run, cohort) becomes a column; labels repeat a cohort name only once,
/// later repeats get a `#n` suffix naming the run.
pub fn compare_cohorts(manifests: &[RunManifest]) -> Result<Comparison> {
    if manifests.len() < 2 {
        return Err(Error::invalid("comparison", "need at least two manifests"));
    }
    let first = &manifests[0];
    if manifests.iter().any(|m| m.grid != first.grid) {
        return Err(Error::MismatchedGrids);
    }
    let mut columns: Vec<(String, usize, Cohort)> = Vec::new();
    let mut used = BTreeSet::new();
    for (i, m) in manifests.iter().enumerate() {
        for &c in &m.cohorts_run {
            let mut label = cohort_title(c);
            if !used.insert(label.clone()) {
                label = format!("{label} #{}", i + 1);
                used.insert(label.clone());
            }
            columns.push((label, i, c));
        }
    }
    let kinds = first.kinds.clone();
    let methods = first.methods.clone();
    let find = |i: usize, c: Cohort, k: ModelKind, meth: ImbalanceMethod| {
        manifests[i]
            .results
            .iter()
            .find(|r| r.cohort == c && r.model == k && r.imbalance == meth)
    };
    let metric = |pick: fn(&JobResult) -> f64| {
        let mut t = Table {
            header: vec!["Model".into()],
            rows: vec![],
        };
        t.header.extend(columns.iter().map(|(l, _, _)| l.clone()));
        for &k in &kinds {
            for &meth in &methods {
                let mut row = vec![row_label(k, meth)];
                for &(_, i, c) in &columns {
                    row.push(find(i, c, k, meth).map_or_else(|| "-".into(), |r| format!("{:.3}", pick(r))));
                }
                t.rows.push(row);
            }
        }
        t
    };
    let base = baseline_method(&methods);
    let top_k = manifests.iter().map(|m| m.top_k).max().unwrap_or(7);
    let mut rankings = Table {
        header: vec!["Rank".into()],
        rows: vec![],
    };
    let mut cells: Vec<Vec<String>> = Vec::new();
    for &k in &kinds {
        for (label, i, c) in &columns {
            rankings.header.push(format!("{} / {label}", k.display_name()));
            let col = match find(*i, *c, k, base).and_then(|r| r.ranking.as_ref()) {
                Some(rank) => rank.iter().take(top_k).map(|(n, _)| n.clone()).collect(),
                None => vec![UNAVAILABLE.to_string(); top_k],
            };
            cells.push(col);
        }
    }
    for r in 0..top_k {
        let mut row = vec![(r + 1).to_string()];
        row.extend(cells.iter().map(|c| c.get(r).cloned().unwrap_or_default()));
        rankings.rows.push(row);
    }
    Ok(Comparison {
        auc: metric(|r| r.metrics.auc),
        gmean: metric(|r| r.metrics.g_mean),
        rankings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels() {
        assert_eq!(row_label(ModelKind::Forest, ImbalanceMethod::Undersample), "Undersampled Random Forest");
        assert_eq!(row_label(ModelKind::Logistic, ImbalanceMethod::CostSensitive), "Cost-Sensitive Logistic Regression");
        assert_eq!(cohort_title(Cohort::Hispanic), "Hispanic");
        assert_eq!(baseline_method(&[ImbalanceMethod::Undersample, ImbalanceMethod::None]), ImbalanceMethod::None);
        assert_eq!(baseline_method(&[ImbalanceMethod::Undersample]), ImbalanceMethod::Undersample);
    }

    #[test]
    fn csv_quoting() {
        let t = Table {
            header: vec!["a".into(), "b".into()],
            rows: vec![vec!["x,y".into(), "z".into()]],
        };
        assert_eq!(t.to_csv(), "a,b\n\"x,y\",z\n");
    }
}
