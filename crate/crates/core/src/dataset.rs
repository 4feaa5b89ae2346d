//! Typed columnar datasets and the row-selection rules applied before modeling.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{is_representable, RawDataset};
use crate::schema::{FieldKind, Schema, LABEL_COLUMN};
use crate::split;

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnValues {
    Categorical(Vec<Option<String>>),
    Continuous(Vec<Option<f64>>),
}

impl ColumnValues {
    pub fn len(&self) -> usize {
        match self {
            ColumnValues::Categorical(v) => v.len(),
            ColumnValues::Continuous(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> FieldKind {
        match self {
            ColumnValues::Categorical(_) => FieldKind::Categorical,
            ColumnValues::Continuous(_) => FieldKind::Continuous,
        }
    }

    pub fn is_missing(&self, row: usize) -> bool {
        match self {
            ColumnValues::Categorical(v) => v[row].is_none(),
            ColumnValues::Continuous(v) => v[row].is_none(),
        }
    }

    fn select(&self, rows: &[usize]) -> ColumnValues {
        match self {
            ColumnValues::Categorical(v) => {
                ColumnValues::Categorical(rows.iter().map(|&r| v[r].clone()).collect())
            }
            ColumnValues::Continuous(v) => {
                ColumnValues::Continuous(rows.iter().map(|&r| v[r]).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub values: ColumnValues,
    /// Category codes declared by the schema, if any.
    pub declared: Option<Vec<String>>,
}

impl Column {
    pub fn categorical(name: impl Into<String>, values: Vec<Option<String>>) -> Self {
        Column {
            name: name.into(),
            values: ColumnValues::Categorical(values),
            declared: None,
        }
    }

    pub fn continuous(name: impl Into<String>, values: Vec<Option<f64>>) -> Self {
        Column {
            name: name.into(),
            values: ColumnValues::Continuous(values),
            declared: None,
        }
    }

    pub fn kind(&self) -> FieldKind {
        self.values.kind()
    }

    pub fn as_continuous(&self) -> Option<&[Option<f64>]> {
        match &self.values {
            ColumnValues::Continuous(v) => Some(v),
            ColumnValues::Categorical(_) => None,
        }
    }

    pub fn as_categorical(&self) -> Option<&[Option<String>]> {
        match &self.values {
            ColumnValues::Categorical(v) => Some(v),
            ColumnValues::Continuous(_) => None,
        }
    }

    pub fn missing_count(&self) -> usize {
        (0..self.values.len())
            .filter(|&r| self.values.is_missing(r))
            .count()
    }
}

/// Columnar table with optional binary labels (`true` = positive = survived).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    columns: Vec<Column>,
    labels: Option<Vec<bool>>,
    n_rows: usize,
}

impl Dataset {
    pub fn new(columns: Vec<Column>, labels: Option<Vec<bool>>) -> Result<Self> {
        let n_rows = columns
            .first()
            .map(|c| c.values.len())
            .or(labels.as_ref().map(Vec::len))
            .unwrap_or(0);
        let mut names = HashSet::new();
        for column in &columns {
            if column.values.len() != n_rows {
                return Err(Error::LengthMismatch {
                    left: column.values.len(),
                    right: n_rows,
                });
            }
            if !names.insert(column.name.as_str()) {
                return Err(Error::DuplicateField(column.name.clone()));
            }
            if let ColumnValues::Continuous(values) = &column.values {
                if let Some(row) = values.iter().position(|v| v.is_some_and(|x| !x.is_finite())) {
                    return Err(Error::BadNumber {
                        row,
                        field: column.name.clone(),
                        value: format!("{}", values[row].unwrap()),
                    });
                }
            }
        }
        if let Some(labels) = &labels {
            if labels.len() != n_rows {
                return Err(Error::LengthMismatch {
                    left: labels.len(),
                    right: n_rows,
                });
            }
        }
        Ok(Dataset {
            columns,
            labels,
            n_rows,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn require_column(&self, name: &str) -> Result<&Column> {
        self.column(name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }

    pub fn labels(&self) -> Option<&[bool]> {
        self.labels.as_deref()
    }

    pub fn require_labels(&self) -> Result<&[bool]> {
        self.labels().ok_or(Error::Unlabeled)
    }

    pub fn with_labels(mut self, labels: Vec<bool>) -> Result<Self> {
        if labels.len() != self.n_rows {
            return Err(Error::LengthMismatch {
                left: labels.len(),
                right: self.n_rows,
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn into_columns(self) -> (Vec<Column>, Option<Vec<bool>>) {
        (self.columns, self.labels)
    }

    /// Keeps the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let columns = self
            .columns
            .iter()
            .map(|c| Column {
                name: c.name.clone(),
                values: c.values.select(rows),
                declared: c.declared.clone(),
            })
            .collect();
        let labels = self
            .labels
            .as_ref()
            .map(|l| rows.iter().map(|&r| l[r]).collect());
        Dataset {
            columns,
            labels,
            n_rows: rows.len(),
        }
    }

    /// Keeps the named columns, in the given order.
    pub fn select_columns<S: AsRef<str>>(&self, names: &[S]) -> Result<Dataset> {
        let columns = names
            .iter()
            .map(|n| self.require_column(n.as_ref()).cloned())
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(columns, self.labels.clone())
    }

    pub fn drop_columns<S: AsRef<str>>(&self, names: &[S]) -> Dataset {
        let drop: HashSet<&str> = names.iter().map(AsRef::as_ref).collect();
        Dataset {
            columns: self
                .columns
                .iter()
                .filter(|c| !drop.contains(c.name.as_str()))
                .cloned()
                .collect(),
            labels: self.labels.clone(),
            n_rows: self.n_rows,
        }
    }

    /// Replaces the column with the same name.
    pub fn replace_column(&mut self, column: Column) -> Result<()> {
        if column.values.len() != self.n_rows {
            return Err(Error::LengthMismatch {
                left: column.values.len(),
                right: self.n_rows,
            });
        }
        let slot = self
            .columns
            .iter_mut()
            .find(|c| c.name == column.name)
            .ok_or_else(|| Error::MissingColumn(column.name.clone()))?;
        *slot = column;
        Ok(())
    }

    /// Labels each row by `rule`. Rows without survival months are removed.
    pub fn derive_labels(&self, rule: &LabelRule) -> Result<Dataset> {
        rule.validate()?;
        let months = self
            .require_column(&rule.survival_field)?
            .as_continuous()
            .ok_or_else(|| Error::WrongKind {
                field: rule.survival_field.clone(),
                expected: "continuous",
            })?;
        let cause = self.require_column(&rule.cause_field)?;
        let cause_codes: HashSet<&str> = rule.cause_codes.iter().map(String::as_str).collect();
        let cause_at = |row: usize| -> Option<String> {
            match &cause.values {
                ColumnValues::Categorical(v) => v[row].clone(),
                ColumnValues::Continuous(v) => v[row].map(|x| format!("{x}")),
            }
        };

        let mut keep = Vec::with_capacity(self.n_rows);
        let mut labels = Vec::with_capacity(self.n_rows);
        for (row, m) in months.iter().enumerate() {
            let Some(m) = m else { continue };
            let died_of_cancer = cause_at(row).is_some_and(|c| cause_codes.contains(c.as_str()));
            let negative = *m < f64::from(rule.cutoff_months) && died_of_cancer;
            keep.push(row);
            labels.push(!negative);
        }
        let mut out = self.select_rows(&keep);
        out.labels = Some(labels);
        Ok(out)
    }

    /// Removes rows with a missing cell in any named field.
    pub fn drop_required_missing<S: AsRef<str>>(&self, fields: &[S]) -> Result<Dataset> {
        let columns = fields
            .iter()
            .map(|f| self.require_column(f.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        let keep: Vec<usize> = (0..self.n_rows)
            .filter(|&r| columns.iter().all(|c| !c.values.is_missing(r)))
            .collect();
        Ok(self.select_rows(&keep))
    }

    /// Tags every row with its cohort under `rule`.
    pub fn cohort_tags(&self, rule: &CohortRule) -> Result<Vec<CohortTag>> {
        let race = self.require_column(&rule.race_field)?;
        let origin = self.require_column(&rule.origin_field)?;
        let code = |c: &Column, row: usize| -> Option<String> {
            match &c.values {
                ColumnValues::Categorical(v) => v[row].clone(),
                ColumnValues::Continuous(v) => v[row].map(|x| format!("{x}")),
            }
        };
        Ok((0..self.n_rows)
            .map(|r| rule.classify(code(race, r).as_deref(), code(origin, r).as_deref()))
            .collect())
    }

    pub fn filter_cohort(&self, rule: &CohortRule, which: Cohort) -> Result<Dataset> {
        let tags = self.cohort_tags(rule)?;
        let keep: Vec<usize> = tags
            .iter()
            .enumerate()
            .filter(|(_, t)| which.admits(**t))
            .map(|(r, _)| r)
            .collect();
        Ok(self.select_rows(&keep))
    }

    /// Random train/test partition; both parts keep original row order.
    pub fn split(&self, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        let (train, test) = split::train_test_indices(self.n_rows, test_fraction, seed)?;
        Ok((self.select_rows(&train), self.select_rows(&test)))
    }

    /// Row indices of `k` folds over the labeled rows.
    pub fn kfold(&self, k: usize, seed: u64, stratified: bool) -> Result<Vec<Vec<usize>>> {
        split::kfold_indices(self.require_labels()?, k, seed, stratified)
    }

    /// Comma-delimited text; labels, when present, go in a trailing
    /// `__label` column as `1`/`0`.
    pub fn to_delimited(&self) -> Result<String> {
        let mut header: Vec<&str> = self.column_names().collect();
        if self.labels.is_some() {
            header.push(LABEL_COLUMN);
        }
        let mut out = header.join(",");
        out.push('\n');
        for row in 0..self.n_rows {
            let mut cells = Vec::with_capacity(header.len());
            for column in &self.columns {
                cells.push(match &column.values {
                    ColumnValues::Categorical(v) => match &v[row] {
                        Some(code) if !is_representable(code) => {
                            return Err(Error::Unrepresentable {
                                field: column.name.clone(),
                                value: code.clone(),
                            })
                        }
                        Some(code) => code.clone(),
                        None => String::new(),
                    },
                    ColumnValues::Continuous(v) => v[row].map(|x| format!("{x}")).unwrap_or_default(),
                });
            }
            if let Some(labels) = &self.labels {
                cells.push(if labels[row] { "1" } else { "0" }.to_string());
            }
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        Ok(out)
    }

    /// Inverse of [`Dataset::to_delimited`]. Kinds and declared categories
    /// come from `schema`; the header may name any subset of its fields.
    pub fn from_delimited(text: &str, schema: &Schema) -> Result<Dataset> {
        let mut lines: Vec<&str> = text.split('\n').map(|l| l.strip_suffix('\r').unwrap_or(l)).collect();
        if lines.last().is_some_and(|l| l.is_empty()) {
            lines.pop();
        }
        let mut lines = lines.into_iter();
        let header: Vec<&str> = lines.next().unwrap_or("").split(',').filter(|h| !h.is_empty()).collect();
        let label_pos = header.iter().position(|h| *h == LABEL_COLUMN);
        let specs = header
            .iter()
            .filter(|h| **h != LABEL_COLUMN)
            .map(|h| schema.field(h).ok_or_else(|| Error::UnknownColumn(h.to_string())))
            .collect::<Result<Vec<_>>>()?;

        let mut cells: Vec<Vec<Option<&str>>> = vec![Vec::new(); specs.len()];
        let mut labels = Vec::new();
        for (row, line) in lines.enumerate() {
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != header.len() {
                return Err(Error::RowArity {
                    row,
                    expected: header.len(),
                    found: parts.len(),
                });
            }
            let mut col = 0;
            for (pos, part) in parts.into_iter().enumerate() {
                if Some(pos) == label_pos {
                    labels.push(match part {
                        "1" => true,
                        "0" => false,
                        other => {
                            return Err(Error::BadNumber {
                                row,
                                field: LABEL_COLUMN.into(),
                                value: other.into(),
                            })
                        }
                    });
                } else {
                    cells[col].push((!part.is_empty()).then_some(part));
                    col += 1;
                }
            }
        }

        let columns = specs
            .into_iter()
            .zip(cells)
            .map(|(spec, values)| typed_column(spec, values))
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(columns, label_pos.map(|_| labels))
    }
}

fn parse_number(value: &str, row: usize, field: &str) -> Result<f64> {
    value
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| Error::BadNumber {
            row,
            field: field.to_string(),
            value: value.to_string(),
        })
}

fn typed_column(spec: &crate::schema::FieldSpec, values: Vec<Option<&str>>) -> Result<Column> {
    let values = match spec.kind {
        FieldKind::Categorical => {
            ColumnValues::Categorical(values.into_iter().map(|v| v.map(str::to_string)).collect())
        }
        FieldKind::Continuous => ColumnValues::Continuous(
            values
                .into_iter()
                .enumerate()
                .map(|(row, v)| v.map(|s| parse_number(s, row, &spec.name)).transpose())
                .collect::<Result<Vec<_>>>()?,
        ),
    };
    Ok(Column {
        name: spec.name.clone(),
        values,
        declared: spec.categories.clone(),
    })
}

/// Converts raw cells into typed columns. Continuous cells must be decimal
/// numerals; categorical codes are kept verbatim.
pub fn decode(raw: &RawDataset) -> Result<Dataset> {
    let schema: &Arc<Schema> = raw.schema();
    let rows = raw.rows();
    let columns = schema
        .fields()
        .iter()
        .enumerate()
        .map(|(idx, spec)| {
            let values = rows.iter().map(|r| r[idx].as_deref()).collect();
            typed_column(spec, values)
        })
        .collect::<Result<Vec<_>>>()?;
    if columns.is_empty() && !rows.is_empty() {
        return Err(Error::invalid("dataset", "schema declares no fields"));
    }
    Dataset::new(columns, None)
}

/// Two-year survivability labeling: negative iff survival months are below
/// the cutoff and the cause of death is one of `cause_codes`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelRule {
    pub cutoff_months: u32,
    pub cause_codes: Vec<String>,
    pub survival_field: String,
    pub cause_field: String,
}

impl Default for LabelRule {
    fn default() -> Self {
        LabelRule {
            cutoff_months: 24,
            // SEER cause-of-death recodes for colon and for rectum/rectosigmoid.
            cause_codes: vec!["21040".into(), "21050".into()],
            survival_field: "survival_months".into(),
            cause_field: "cause_of_death".into(),
        }
    }
}

impl LabelRule {
    pub fn validate(&self) -> Result<()> {
        if self.cutoff_months < 1 {
            return Err(Error::invalid("label rule", "cutoff_months must be at least 1"));
        }
        if self.cause_codes.is_empty() {
            return Err(Error::invalid("label rule", "cause_codes must not be empty"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CohortTag {
    White,
    Hispanic,
    Excluded,
}

/// Which cohort to keep. `Mixed` is the union of White and Hispanic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cohort {
    White,
    Hispanic,
    Mixed,
}

impl Cohort {
    pub const ALL: [Cohort; 3] = [Cohort::White, Cohort::Hispanic, Cohort::Mixed];

    pub fn admits(self, tag: CohortTag) -> bool {
        matches!(
            (self, tag),
            (Cohort::White, CohortTag::White)
                | (Cohort::Hispanic, CohortTag::Hispanic)
                | (Cohort::Mixed, CohortTag::White | CohortTag::Hispanic)
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            Cohort::White => "white",
            Cohort::Hispanic => "hispanic",
            Cohort::Mixed => "mixed",
        }
    }
}

impl fmt::Display for Cohort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Cohort {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "white" => Ok(Cohort::White),
            "hispanic" => Ok(Cohort::Hispanic),
            "mixed" => Ok(Cohort::Mixed),
            other => Err(Error::invalid("cohort", format!("`{other}` (expected white, hispanic or mixed)"))),
        }
    }
}

/// Ethnicity rule over the race recode and Hispanic-origin fields.
///
/// A row is White when its race code is a White code and its origin code is
/// non-Hispanic; Hispanic when its origin code is Hispanic; Excluded
/// otherwise, including when either field is missing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortRule {
    pub race_field: String,
    pub origin_field: String,
    pub white_race_codes: Vec<String>,
    pub non_hispanic_codes: Vec<String>,
    pub hispanic_codes: Vec<String>,
}

impl Default for CohortRule {
    fn default() -> Self {
        CohortRule {
            race_field: "race".into(),
            origin_field: "hispanic_origin".into(),
            white_race_codes: vec!["1".into()],
            non_hispanic_codes: vec!["0".into()],
            hispanic_codes: (1..=7).map(|c| c.to_string()).collect(),
        }
    }
}

impl CohortRule {
    pub fn classify(&self, race: Option<&str>, origin: Option<&str>) -> CohortTag {
        let has = |codes: &[String], v: Option<&str>| v.is_some_and(|v| codes.iter().any(|c| c == v));
        if has(&self.hispanic_codes, origin) {
            CohortTag::Hispanic
        } else if has(&self.white_race_codes, race) && has(&self.non_hispanic_codes, origin) {
            CohortTag::White
        } else {
            CohortTag::Excluded
        }
    }

    pub fn validate(&self) -> Result<()> {
        let hispanic: HashSet<&String> = self.hispanic_codes.iter().collect();
        if let Some(code) = self.non_hispanic_codes.iter().find(|c| hispanic.contains(c)) {
            return Err(Error::invalid(
                "cohort rule",
                format!("origin code `{code}` is both Hispanic and non-Hispanic"),
            ));
        }
        Ok(())
    }
}

/// Counts of each label, `(positives, negatives)`.
pub fn class_counts(labels: &[bool]) -> (usize, usize) {
    let pos = labels.iter().filter(|&&l| l).count();
    (pos, labels.len() - pos)
}

/// Per-column missing counts, in column order.
pub fn missing_summary(ds: &Dataset) -> Vec<(String, usize)> {
    ds.columns()
        .iter()
        .map(|c| (c.name.clone(), c.missing_count()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn survival(months: &[Option<f64>], causes: &[&str]) -> Dataset {
        Dataset::new(
            vec![
                Column::continuous("survival_months", months.to_vec()),
                Column::categorical(
                    "cause_of_death",
                    causes.iter().map(|c| Some(c.to_string())).collect(),
                ),
            ],
            None,
        )
        .unwrap()
    }

    #[test]
    fn label_rule_cases() {
        let ds = survival(&[Some(20.0), Some(20.0), Some(24.0), Some(5.0)], &["21040", "50000", "21050", "00000"]);
        let labeled = ds.derive_labels(&LabelRule::default()).unwrap();
        // negative only for <24 months and a colorectal cause; exactly 24 is positive
        assert_eq!(labeled.labels().unwrap(), &[false, true, true, true]);
    }

    #[test]
    fn label_rule_drops_missing_months_and_is_idempotent() {
        let ds = survival(&[None, Some(3.0)], &["21040", "21040"]);
        let once = ds.derive_labels(&LabelRule::default()).unwrap();
        assert_eq!(once.n_rows(), 1);
        assert_eq!(once.labels().unwrap(), &[false]);
        assert_eq!(once.derive_labels(&LabelRule::default()).unwrap(), once);
    }

    #[test]
    fn label_rule_requires_fields() {
        let ds = Dataset::new(vec![Column::continuous("age", vec![Some(1.0)])], None).unwrap();
        assert!(matches!(
            ds.derive_labels(&LabelRule::default()),
            Err(Error::MissingColumn(_))
        ));
    }

    #[test]
    fn drop_required_missing_counts() {
        let ds = Dataset::new(
            vec![
                Column::continuous("age", vec![Some(60.0), None, Some(70.0), None, Some(50.0)]),
                Column::categorical("sex", vec![Some("1".into()); 5]),
            ],
            None,
        )
        .unwrap();
        let kept = ds.drop_required_missing(&["age"]).unwrap();
        assert_eq!(kept.n_rows(), 3);
        assert_eq!(
            kept.column("age").unwrap().as_continuous().unwrap(),
            &[Some(60.0), Some(70.0), Some(50.0)]
        );
        assert_eq!(ds.drop_required_missing(&["sex"]).unwrap(), ds);
    }

    #[test]
    fn cohort_classification() {
        let rule = CohortRule::default();
        assert_eq!(rule.classify(Some("1"), Some("0")), CohortTag::White);
        assert_eq!(rule.classify(Some("1"), Some("3")), CohortTag::Hispanic);
        assert_eq!(rule.classify(Some("2"), Some("1")), CohortTag::Hispanic);
        assert_eq!(rule.classify(Some("2"), Some("0")), CohortTag::Excluded);
        assert_eq!(rule.classify(None, Some("0")), CohortTag::Excluded);
        assert_eq!(rule.classify(Some("1"), None), CohortTag::Excluded);
    }

    #[test]
    fn cohort_filters_partition_mixed() {
        let race = ["1", "1", "2", "1", "1"];
        let origin = ["0", "2", "0", "0", "1"];
        let ds = Dataset::new(
            vec![
                Column::categorical("race", race.iter().map(|s| Some(s.to_string())).collect()),
                Column::categorical("hispanic_origin", origin.iter().map(|s| Some(s.to_string())).collect()),
            ],
            None,
        )
        .unwrap();
        let rule = CohortRule::default();
        let white = ds.filter_cohort(&rule, Cohort::White).unwrap();
        let hispanic = ds.filter_cohort(&rule, Cohort::Hispanic).unwrap();
        let mixed = ds.filter_cohort(&rule, Cohort::Mixed).unwrap();
        assert_eq!((white.n_rows(), hispanic.n_rows(), mixed.n_rows()), (2, 2, 4));

        let all_white = ds.select_rows(&[0, 3]);
        assert_eq!(all_white.filter_cohort(&rule, Cohort::White).unwrap(), all_white);
        assert_eq!(all_white.filter_cohort(&rule, Cohort::Hispanic).unwrap().n_rows(), 0);
    }

    #[test]
    fn decode_numerals() {
        use crate::schema::parse_schema;
        let schema = Arc::new(parse_schema("record_width 4\nage continuous 0 3\nsex categorical 3 1\n").unwrap());
        let raw = crate::ingest::parse_fixed_width(b"0681\n   2\n", &schema).unwrap();
        let ds = decode(&raw).unwrap();
        assert_eq!(ds.column("age").unwrap().as_continuous().unwrap(), &[Some(68.0), None]);
        assert_eq!(
            ds.column("sex").unwrap().as_categorical().unwrap(),
            &[Some("1".to_string()), Some("2".to_string())]
        );
        let bad = crate::ingest::parse_fixed_width(b"6x81\n", &schema).unwrap();
        assert!(matches!(decode(&bad), Err(Error::BadNumber { row: 0, .. })));
    }

    #[test]
    fn delimited_round_trip_with_labels() {
        use crate::schema::parse_schema;
        let schema = parse_schema("record_width 4\nage continuous 0 3\nsex categorical 3 1\n").unwrap();
        let ds = Dataset::new(
            vec![
                Column::continuous("age", vec![Some(68.5), None]),
                Column::categorical("sex", vec![None, Some("2".into())]),
            ],
            Some(vec![true, false]),
        )
        .unwrap();
        let text = ds.to_delimited().unwrap();
        assert_eq!(text, "age,sex,__label\n68.5,,1\n,2,0\n");
        assert_eq!(Dataset::from_delimited(&text, &schema).unwrap(), ds);
    }
}
