//! Multivariate imputation by chained equations.
//!
//! Every missing cell is first filled with its column's mean (or median;
//! categorical columns use the mode). Then, for the configured number of
//! cycles, each target column is regressed by ordinary least squares on all
//! other columns, categorical ones expanded to indicator columns, using the
//! rows where the target was observed. The regression predictions replace
//! the target's originally missing entries. Later targets in a cycle see the
//! values imputed for earlier ones.

use std::collections::{BTreeMap, HashMap, HashSet};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::{Column, ColumnValues, Dataset};
use crate::error::{Error, Result};

/// Ridge term added when the normal equations are singular.
pub const RIDGE_FALLBACK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialFill {
    #[default]
    Mean,
    Median,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImputePlan {
    pub targets: Vec<String>,
    pub cycles: usize,
    pub fill: InitialFill,
}

impl Default for ImputePlan {
    fn default() -> Self {
        ImputePlan {
            targets: vec!["tumor_size".into(), "positive_nodes".into()],
            cycles: 10,
            fill: InitialFill::Mean,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum FillValue {
    Number(f64),
    Code(String),
}

/// Working copy with every cell present.
#[derive(Debug, Clone)]
enum Filled {
    Continuous(Vec<f64>),
    Categorical(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Term {
    Continuous { column: usize, position: usize },
    /// Indicator columns for every level except the reference level.
    Categorical { column: usize, levels: BTreeMap<String, usize> },
}

/// Indicator layout of one target's predictors; position 0 is the intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Design {
    terms: Vec<Term>,
    width: usize,
}

impl Design {
    fn new(columns: &[Filled], target: usize) -> Self {
        let mut terms = Vec::new();
        let mut position = 1;
        for (idx, column) in columns.iter().enumerate() {
            if idx == target {
                continue;
            }
            match column {
                Filled::Continuous(_) => {
                    terms.push(Term::Continuous {
                        column: idx,
                        position,
                    });
                    position += 1;
                }
                Filled::Categorical(values) => {
                    let distinct: std::collections::BTreeSet<&String> = values.iter().collect();
                    let levels: BTreeMap<String, usize> = distinct
                        .into_iter()
                        .skip(1)
                        .enumerate()
                        .map(|(i, code)| (code.clone(), position + i))
                        .collect();
                    position += levels.len();
                    terms.push(Term::Categorical { column: idx, levels });
                }
            }
        }
        Design {
            terms,
            width: position,
        }
    }

    fn row(&self, columns: &[Filled], row: usize, out: &mut Vec<(usize, f64)>) {
        out.clear();
        out.push((0, 1.0));
        for term in &self.terms {
            match term {
                Term::Continuous { column, position } => {
                    if let Filled::Continuous(v) = &columns[*column] {
                        out.push((*position, v[row]));
                    }
                }
                Term::Categorical { column, levels } => {
                    if let Filled::Categorical(v) = &columns[*column] {
                        if let Some(&pos) = levels.get(&v[row]) {
                            out.push((pos, 1.0));
                        }
                    }
                }
            }
        }
    }

    fn predict(&self, coefficients: &[f64], columns: &[Filled], row: usize, scratch: &mut Vec<(usize, f64)>) -> f64 {
        self.row(columns, row, scratch);
        scratch.iter().map(|&(p, v)| coefficients[p] * v).sum()
    }
}

/// Final-cycle regression for one target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TargetRegression {
    target: usize,
    design: Design,
    coefficients: Vec<f64>,
}

/// What MICE learned on a training set: fill values and each target's
/// final-cycle regression, for imputing further rows without refitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiceModel {
    columns: Vec<String>,
    fills: Vec<FillValue>,
    regressions: Vec<TargetRegression>,
    cycle_changes: Vec<f64>,
}

impl MiceModel {
    /// Largest absolute change of any imputed value, per cycle.
    pub fn cycle_changes(&self) -> &[f64] {
        &self.cycle_changes
    }

    /// Imputes `ds` with the stored fills and one pass of the stored
    /// regressions. Column names must match the training dataset.
    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        let names: Vec<&str> = ds.column_names().collect();
        if names.len() != self.columns.len() || names.iter().zip(&self.columns).any(|(a, b)| a != b) {
            return Err(Error::invalid("imputation input", "columns differ from the fitted dataset"));
        }
        let mut filled = initial_fill_with(ds, &self.fills)?;
        let mut scratch = Vec::new();
        for reg in &self.regressions {
            let missing: Vec<usize> = missing_rows(&ds.columns()[reg.target]);
            for row in missing {
                let value = reg.design.predict(&reg.coefficients, &filled, row, &mut scratch);
                if let Filled::Continuous(v) = &mut filled[reg.target] {
                    v[row] = value;
                }
            }
        }
        rebuild(ds, filled)
    }
}

fn missing_rows(column: &Column) -> Vec<usize> {
    (0..column.values.len())
        .filter(|&r| column.values.is_missing(r))
        .collect()
}

fn fill_value(column: &Column, fill: InitialFill) -> Result<FillValue> {
    match &column.values {
        ColumnValues::Continuous(v) => {
            let mut observed: Vec<f64> = v.iter().flatten().copied().collect();
            if observed.is_empty() {
                return Err(Error::NoObservedValues(column.name.clone()));
            }
            Ok(FillValue::Number(match fill {
                InitialFill::Mean => observed.iter().sum::<f64>() / observed.len() as f64,
                InitialFill::Median => {
                    observed.sort_by(f64::total_cmp);
                    let mid = observed.len() / 2;
                    if observed.len() % 2 == 1 {
                        observed[mid]
                    } else {
                        (observed[mid - 1] + observed[mid]) / 2.0
                    }
                }
            }))
        }
        ColumnValues::Categorical(v) => {
            let mut counts: HashMap<&str, usize> = HashMap::new();
            for code in v.iter().flatten() {
                *counts.entry(code).or_default() += 1;
            }
            // most frequent code, ties to the smallest
            counts
                .into_iter()
                .max_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.cmp(a.0)))
                .map(|(code, _)| FillValue::Code(code.to_string()))
                .ok_or_else(|| Error::NoObservedValues(column.name.clone()))
        }
    }
}

fn initial_fill_with(ds: &Dataset, fills: &[FillValue]) -> Result<Vec<Filled>> {
    ds.columns()
        .iter()
        .zip(fills)
        .map(|(column, fill)| match (&column.values, fill) {
            (ColumnValues::Continuous(v), FillValue::Number(x)) => {
                Ok(Filled::Continuous(v.iter().map(|c| c.unwrap_or(*x)).collect()))
            }
            (ColumnValues::Categorical(v), FillValue::Code(code)) => Ok(Filled::Categorical(
                v.iter().map(|c| c.clone().unwrap_or_else(|| code.clone())).collect(),
            )),
            _ => Err(Error::invalid("imputation input", format!("kind of `{}` changed", column.name))),
        })
        .collect()
}

fn rebuild(ds: &Dataset, filled: Vec<Filled>) -> Result<Dataset> {
    let columns = ds
        .columns()
        .iter()
        .zip(filled)
        .map(|(column, values)| Column {
            name: column.name.clone(),
            values: match values {
                Filled::Continuous(v) => ColumnValues::Continuous(v.into_iter().map(Some).collect()),
                Filled::Categorical(v) => ColumnValues::Categorical(v.into_iter().map(Some).collect()),
            },
            declared: column.declared.clone(),
        })
        .collect();
    Dataset::new(columns, ds.labels().map(<[bool]>::to_vec))
}

/// Least squares through the normal equations, falling back to a small
/// ridge term when the system is singular or numerically so.
fn solve_least_squares(gram: DMatrix<f64>, rhs: DVector<f64>, target: &str) -> Result<Vec<f64>> {
    let max_diag = gram.diagonal().iter().fold(0.0f64, |m, &d| m.max(d.abs()));
    let well_posed = |chol: &nalgebra::Cholesky<f64, nalgebra::Dyn>| {
        chol.l_dirty()
            .diagonal()
            .iter()
            .all(|&l| l * l > 1e-12 * max_diag.max(1.0))
    };
    if let Some(chol) = gram.clone().cholesky() {
        if well_posed(&chol) {
            return Ok(chol.solve(&rhs).iter().copied().collect());
        }
    }
    let n = gram.nrows();
    let ridged = gram + DMatrix::<f64>::identity(n, n) * RIDGE_FALLBACK;
    ridged
        .cholesky()
        .map(|chol| chol.solve(&rhs).iter().copied().collect())
        .ok_or_else(|| Error::SingularSystem(target.to_string()))
}

fn fit_regression(design: &Design, columns: &[Filled], target: usize, rows: &[usize], name: &str) -> Result<Vec<f64>> {
    let p = design.width;
    let mut gram = DMatrix::<f64>::zeros(p, p);
    let mut rhs = DVector::<f64>::zeros(p);
    let Filled::Continuous(y) = &columns[target] else {
        unreachable!("targets are continuous");
    };
    let mut entries = Vec::with_capacity(32);
    for &row in rows {
        design.row(columns, row, &mut entries);
        for &(i, vi) in &entries {
            rhs[i] += vi * y[row];
            for &(j, vj) in &entries {
                gram[(i, j)] += vi * vj;
            }
        }
    }
    solve_least_squares(gram, rhs, name)
}

/// Runs MICE and returns the imputed dataset plus the fitted model.
/// Observed cells are never changed; all missing cells end up filled.
pub fn fit_mice(ds: &Dataset, plan: &ImputePlan) -> Result<(Dataset, MiceModel)> {
    if plan.cycles < 1 {
        return Err(Error::invalid("impute plan", "cycle count must be at least 1"));
    }
    let mut seen = HashSet::new();
    let mut targets = Vec::with_capacity(plan.targets.len());
    for name in &plan.targets {
        if !seen.insert(name.as_str()) {
            return Err(Error::invalid("impute plan", format!("target `{name}` listed twice")));
        }
        let idx = ds
            .columns()
            .iter()
            .position(|c| &c.name == name)
            .ok_or_else(|| Error::MissingColumn(name.clone()))?;
        let column = &ds.columns()[idx];
        if column.as_continuous().is_none() {
            return Err(Error::WrongKind {
                field: name.clone(),
                expected: "continuous",
            });
        }
        if column.missing_count() == column.values.len() {
            return Err(Error::NoObservedValues(name.clone()));
        }
        targets.push(idx);
    }

    let fills = ds
        .columns()
        .iter()
        .map(|c| fill_value(c, plan.fill))
        .collect::<Result<Vec<_>>>()?;
    let mut filled = initial_fill_with(ds, &fills)?;

    let plans: Vec<(usize, Design, Vec<usize>, Vec<usize>)> = targets
        .iter()
        .map(|&t| {
            let column = &ds.columns()[t];
            let observed = (0..ds.n_rows()).filter(|&r| !column.values.is_missing(r)).collect();
            (t, Design::new(&filled, t), observed, missing_rows(column))
        })
        .collect();

    let mut regressions = Vec::with_capacity(plans.len());
    let mut cycle_changes = Vec::with_capacity(plan.cycles);
    let mut scratch = Vec::new();
    for cycle in 0..plan.cycles {
        let mut max_change = 0.0f64;
        for (target, design, observed, missing) in &plans {
            let name = &ds.columns()[*target].name;
            let coefficients = fit_regression(design, &filled, *target, observed, name)?;
            let predictions: Vec<f64> = missing
                .iter()
                .map(|&row| design.predict(&coefficients, &filled, row, &mut scratch))
                .collect();
            if let Filled::Continuous(v) = &mut filled[*target] {
                for (&row, value) in missing.iter().zip(predictions) {
                    max_change = max_change.max((value - v[row]).abs());
                    v[row] = value;
                }
            }
            if cycle + 1 == plan.cycles {
                regressions.push(TargetRegression {
                    target: *target,
                    design: design.clone(),
                    coefficients,
                });
            }
        }
        cycle_changes.push(max_change);
    }

    let model = MiceModel {
        columns: ds.column_names().map(str::to_string).collect(),
        fills,
        regressions,
        cycle_changes,
    };
    Ok((rebuild(ds, filled)?, model))
}

/// MICE imputation of `ds` under `plan`.
pub fn mice_impute(ds: &Dataset, plan: &ImputePlan) -> Result<Dataset> {
    fit_mice(ds, plan).map(|(out, _)| out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan(targets: &[&str]) -> ImputePlan {
        ImputePlan {
            targets: targets.iter().map(|s| s.to_string()).collect(),
            ..ImputePlan::default()
        }
    }

    #[test]
    fn complete_data_is_untouched() {
        let ds = Dataset::new(
            vec![
                Column::continuous("x", vec![Some(1.0), Some(2.0), Some(4.0)]),
                Column::continuous("y", vec![Some(2.0), Some(3.0), Some(9.0)]),
                Column::categorical("g", vec![Some("a".into()), Some("b".into()), Some("a".into())]),
            ],
            Some(vec![true, false, true]),
        )
        .unwrap();
        assert_eq!(mice_impute(&ds, &plan(&["y"])).unwrap(), ds);
    }

    #[test]
    fn exact_linear_relation_recovered() {
        let xs: Vec<f64> = (1..=9).map(f64::from).collect();
        let ys: Vec<Option<f64>> = xs.iter().map(|&x| if x == 5.0 { None } else { Some(2.0 * x) }).collect();
        let ds = Dataset::new(
            vec![
                Column::continuous("x", xs.iter().copied().map(Some).collect()),
                Column::continuous("y", ys),
            ],
            None,
        )
        .unwrap();
        let out = mice_impute(&ds, &plan(&["y"])).unwrap();
        let y5 = out.column("y").unwrap().as_continuous().unwrap()[4].unwrap();
        assert!((y5 - 10.0).abs() < 1e-6, "{y5}");
    }

    #[test]
    fn median_and_mode_fill_non_targets() {
        let ds = Dataset::new(
            vec![
                Column::continuous("x", vec![Some(1.0), Some(2.0), Some(10.0), None]),
                Column::categorical("g", vec![Some("b".into()), Some("a".into()), None, Some("b".into())]),
                Column::continuous("y", vec![Some(1.0), None, Some(3.0), Some(4.0)]),
            ],
            None,
        )
        .unwrap();
        let p = ImputePlan {
            fill: InitialFill::Median,
            ..plan(&["y"])
        };
        let out = mice_impute(&ds, &p).unwrap();
        assert_eq!(out.column("x").unwrap().as_continuous().unwrap()[3], Some(2.0));
        assert_eq!(out.column("g").unwrap().as_categorical().unwrap()[2].as_deref(), Some("b"));
        assert!(out.columns().iter().all(|c| c.missing_count() == 0));
    }

    #[test]
    fn plan_errors() {
        let ds = Dataset::new(
            vec![
                Column::continuous("x", vec![Some(1.0), Some(2.0)]),
                Column::continuous("y", vec![None, None]),
                Column::categorical("g", vec![Some("a".into()), None]),
            ],
            None,
        )
        .unwrap();
        assert!(matches!(mice_impute(&ds, &plan(&["y"])), Err(Error::NoObservedValues(_))));
        assert!(matches!(mice_impute(&ds, &plan(&["g"])), Err(Error::WrongKind { .. })));
        assert!(matches!(mice_impute(&ds, &plan(&["z"])), Err(Error::MissingColumn(_))));
        let zero = ImputePlan {
            cycles: 0,
            ..plan(&["x"])
        };
        assert!(mice_impute(&ds, &zero).is_err());
    }

    #[test]
    fn duplicated_predictor_falls_back_to_ridge() {
        let xs: Vec<f64> = (0..20).map(f64::from).collect();
        let ds = Dataset::new(
            vec![
                Column::continuous("x", xs.iter().copied().map(Some).collect()),
                Column::continuous("x_copy", xs.iter().copied().map(Some).collect()),
                Column::continuous(
                    "y",
                    xs.iter().map(|&x| if x == 7.0 { None } else { Some(3.0 * x + 1.0) }).collect(),
                ),
            ],
            None,
        )
        .unwrap();
        let out = mice_impute(&ds, &plan(&["y"])).unwrap();
        let y7 = out.column("y").unwrap().as_continuous().unwrap()[7].unwrap();
        assert!((y7 - 22.0).abs() < 1e-4, "{y7}");
    }

    #[test]
    fn fitted_model_imputes_new_rows() {
        let xs: Vec<f64> = (0..30).map(f64::from).collect();
        let train = Dataset::new(
            vec![
                Column::continuous("x", xs.iter().copied().map(Some).collect()),
                Column::continuous(
                    "y",
                    xs.iter().map(|&x| if (x as usize).is_multiple_of(4) { None } else { Some(0.5 * x - 2.0) }).collect(),
                ),
            ],
            None,
        )
        .unwrap();
        let (_, model) = fit_mice(&train, &plan(&["y"])).unwrap();
        let test = Dataset::new(
            vec![
                Column::continuous("x", vec![Some(100.0), Some(3.0)]),
                Column::continuous("y", vec![None, Some(-7.0)]),
            ],
            None,
        )
        .unwrap();
        let out = model.apply(&test).unwrap();
        let y = out.column("y").unwrap().as_continuous().unwrap();
        assert!((y[0].unwrap() - 48.0).abs() < 1e-8);
        assert_eq!(y[1], Some(-7.0));
    }
}
