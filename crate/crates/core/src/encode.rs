//! One-hot encoding into a dense design matrix, and standardization of the
//! continuous columns.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{ColumnValues, Dataset};
use crate::error::{Error, Result};
use crate::schema::{FieldKind, LABEL_COLUMN};

/// Where one original feature lives in the encoded matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSlot {
    pub name: String,
    pub kind: FieldKind,
    pub start: usize,
    pub len: usize,
    /// One entry per binary column, in column order. Empty for continuous.
    #[serde(default)]
    pub categories: Vec<String>,
}

impl FeatureSlot {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.len
    }
}

/// Mapping from original features to contiguous column ranges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureMap {
    features: Vec<FeatureSlot>,
    n_cols: usize,
}

pub type Fingerprint = [u8; 32];

impl FeatureMap {
    /// Builds a map from slots given in column order; ranges must tile
    /// `0..n_cols` exactly.
    pub fn from_slots(features: Vec<FeatureSlot>) -> Result<Self> {
        let mut next = 0;
        for slot in &features {
            let expected_len = match slot.kind {
                FieldKind::Categorical => slot.categories.len(),
                FieldKind::Continuous => 1,
            };
            if slot.start != next || slot.len != expected_len {
                return Err(Error::invalid(
                    "feature map",
                    format!("slot `{}` does not continue the column ranges", slot.name),
                ));
            }
            next += slot.len;
        }
        Ok(FeatureMap {
            features,
            n_cols: next,
        })
    }

    pub fn features(&self) -> &[FeatureSlot] {
        &self.features
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn feature(&self, name: &str) -> Option<&FeatureSlot> {
        self.features.iter().find(|f| f.name == name)
    }

    /// Column headers: `feature` for continuous, `feature=code` for one-hot.
    pub fn column_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.n_cols);
        for slot in &self.features {
            match slot.kind {
                FieldKind::Continuous => names.push(slot.name.clone()),
                FieldKind::Categorical => {
                    names.extend(slot.categories.iter().map(|c| format!("{}={c}", slot.name)))
                }
            }
        }
        names
    }

    /// Feature index owning each column.
    pub fn column_owners(&self) -> Vec<usize> {
        let mut owners = vec![0; self.n_cols];
        for (idx, slot) in self.features.iter().enumerate() {
            owners[slot.range()].fill(idx);
        }
        owners
    }

    /// SHA-256 over the canonical JSON form.
    pub fn fingerprint(&self) -> Fingerprint {
        let json = serde_json::to_vec(self).expect("feature map serializes");
        Sha256::digest(&json).into()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("feature map serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            features: Vec<FeatureSlot>,
        }
        let raw: Raw = serde_json::from_str(text)
            .map_err(|e| Error::invalid("feature map file", e.to_string()))?;
        FeatureMap::from_slots(raw.features)
    }
}

/// Learns the column layout. Categories are the schema-declared codes in
/// declared order followed by any further observed codes, sorted.
pub fn fit_encoder(ds: &Dataset) -> FeatureMap {
    let mut features = Vec::with_capacity(ds.columns().len());
    let mut start = 0;
    for column in ds.columns() {
        let slot = match &column.values {
            ColumnValues::Continuous(_) => FeatureSlot {
                name: column.name.clone(),
                kind: FieldKind::Continuous,
                start,
                len: 1,
                categories: Vec::new(),
            },
            ColumnValues::Categorical(values) => {
                let mut categories = column.declared.clone().unwrap_or_default();
                let declared: std::collections::HashSet<&String> = categories.iter().collect();
                let extra: BTreeSet<&String> = values
                    .iter()
                    .flatten()
                    .filter(|v| !declared.contains(v))
                    .collect();
                let extra: Vec<String> = extra.into_iter().cloned().collect();
                categories.extend(extra);
                FeatureSlot {
                    name: column.name.clone(),
                    kind: FieldKind::Categorical,
                    start,
                    len: categories.len(),
                    categories,
                }
            }
        };
        start += slot.len;
        features.push(slot);
    }
    FeatureMap {
        features,
        n_cols: start,
    }
}

/// Dense row-major design matrix with its feature map and optional labels.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedMatrix {
    values: Array2<f64>,
    map: Arc<FeatureMap>,
    labels: Option<Vec<bool>>,
}

impl EncodedMatrix {
    pub fn new(values: Array2<f64>, map: Arc<FeatureMap>, labels: Option<Vec<bool>>) -> Result<Self> {
        if values.ncols() != map.n_cols() {
            return Err(Error::DimensionMismatch {
                expected: map.n_cols(),
                found: values.ncols(),
            });
        }
        if let Some(l) = &labels {
            if l.len() != values.nrows() {
                return Err(Error::LengthMismatch {
                    left: l.len(),
                    right: values.nrows(),
                });
            }
        }
        Ok(EncodedMatrix { values, map, labels })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn map(&self) -> &Arc<FeatureMap> {
        &self.map
    }

    pub fn labels(&self) -> Option<&[bool]> {
        self.labels.as_deref()
    }

    pub fn require_labels(&self) -> Result<&[bool]> {
        self.labels().ok_or(Error::Unlabeled)
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn select_rows(&self, rows: &[usize]) -> EncodedMatrix {
        EncodedMatrix {
            values: self.values.select(Axis(0), rows),
            map: Arc::clone(&self.map),
            labels: self.labels.as_ref().map(|l| rows.iter().map(|&r| l[r]).collect()),
        }
    }

    /// Comma-delimited text with a header of column names and, when
    /// labeled, a trailing `__label` column.
    pub fn to_delimited(&self) -> String {
        let mut header = self.map.column_names();
        if self.labels.is_some() {
            header.push(LABEL_COLUMN.to_string());
        }
        let mut out = header.join(",");
        out.push('\n');
        for (r, row) in self.values.rows().into_iter().enumerate() {
            let mut cells: Vec<String> = row.iter().map(|x| format!("{x}")).collect();
            if let Some(labels) = &self.labels {
                cells.push(if labels[r] { "1" } else { "0" }.into());
            }
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_delimited(text: &str, map: Arc<FeatureMap>) -> Result<Self> {
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
        let expected = map.column_names();
        let labeled = header.last() == Some(&LABEL_COLUMN);
        let names = if labeled { &header[..header.len() - 1] } else { &header[..] };
        if names.len() != expected.len() || names.iter().zip(&expected).any(|(a, b)| a != b) {
            return Err(Error::invalid("matrix file", "header does not match the feature map"));
        }
        let mut data = Vec::new();
        let mut labels = Vec::new();
        let mut n_rows = 0;
        for (row, line) in lines.enumerate() {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != header.len() {
                return Err(Error::RowArity {
                    row,
                    expected: header.len(),
                    found: cells.len(),
                });
            }
            for (col, cell) in cells.iter().enumerate() {
                if labeled && col == names.len() {
                    labels.push(*cell == "1");
                } else {
                    data.push(cell.parse::<f64>().map_err(|_| Error::BadNumber {
                        row,
                        field: names[col].to_string(),
                        value: cell.to_string(),
                    })?);
                }
            }
            n_rows += 1;
        }
        let values = Array2::from_shape_vec((n_rows, map.n_cols()), data)
            .map_err(|e| Error::invalid("matrix file", e.to_string()))?;
        EncodedMatrix::new(values, map, labeled.then_some(labels))
    }
}

/// Encodes a fully imputed dataset. Categories unseen by the map encode as
/// an all-zero slice.
pub fn encode(ds: &Dataset, map: &Arc<FeatureMap>) -> Result<EncodedMatrix> {
    let n = ds.n_rows();
    let mut values = Array2::<f64>::zeros((n, map.n_cols()));
    for slot in map.features() {
        let column = ds.require_column(&slot.name)?;
        if column.kind() != slot.kind {
            return Err(Error::WrongKind {
                field: slot.name.clone(),
                expected: match slot.kind {
                    FieldKind::Categorical => "categorical",
                    FieldKind::Continuous => "continuous",
                },
            });
        }
        match &column.values {
            ColumnValues::Continuous(v) => {
                for (row, x) in v.iter().enumerate() {
                    values[[row, slot.start]] = x.ok_or_else(|| Error::MissingValue {
                        field: slot.name.clone(),
                        row,
                    })?;
                }
            }
            ColumnValues::Categorical(v) => {
                let index: HashMap<&str, usize> = slot
                    .categories
                    .iter()
                    .enumerate()
                    .map(|(i, c)| (c.as_str(), i))
                    .collect();
                for (row, code) in v.iter().enumerate() {
                    let code = code.as_deref().ok_or_else(|| Error::MissingValue {
                        field: slot.name.clone(),
                        row,
                    })?;
                    if let Some(&i) = index.get(code) {
                        values[[row, slot.start + i]] = 1.0;
                    }
                }
            }
        }
    }
    EncodedMatrix::new(values, Arc::clone(map), ds.labels().map(<[bool]>::to_vec))
}

/// Per-column centering and scaling for the continuous columns, with
/// population standard deviation. Zero-variance columns are only centered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    /// `(column, mean, scale)`; scale is 1 for zero-variance columns.
    columns: Vec<(usize, f64, f64)>,
}

impl Standardizer {
    pub fn fit(matrix: &EncodedMatrix) -> Self {
        let n = matrix.n_rows().max(1) as f64;
        let columns = matrix
            .map()
            .features()
            .iter()
            .filter(|s| s.kind == FieldKind::Continuous)
            .map(|slot| {
                let col = matrix.values().column(slot.start);
                let mean = col.sum() / n;
                let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
                let sd = var.sqrt();
                (slot.start, mean, if sd > 0.0 { sd } else { 1.0 })
            })
            .collect();
        Standardizer { columns }
    }

    pub fn transform(&self, matrix: &EncodedMatrix) -> EncodedMatrix {
        let mut out = matrix.clone();
        for &(col, mean, scale) in &self.columns {
            out.values
                .column_mut(col)
                .mapv_inplace(|x| (x - mean) / scale);
        }
        out
    }
}
