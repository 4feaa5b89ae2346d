//! Raw record ingestion: fixed-width ASCII files and comma-delimited text.

use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::schema::{FieldSpec, Schema};

/// One undecoded cell: the trimmed field text, or `None` when missing.
pub type RawCell = Option<String>;

/// Rows of undecoded cells laid out by a schema.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    schema: Arc<Schema>,
    rows: Vec<Vec<RawCell>>,
}

impl RawDataset {
    pub fn new(schema: Arc<Schema>, rows: Vec<Vec<RawCell>>) -> Result<Self> {
        let width = schema.fields().len();
        if let Some((row, cells)) = rows.iter().enumerate().find(|(_, r)| r.len() != width) {
            return Err(Error::RowArity {
                row,
                expected: width,
                found: cells.len(),
            });
        }
        Ok(RawDataset { schema, rows })
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn rows(&self) -> &[Vec<RawCell>] {
        &self.rows
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn into_rows(self) -> Vec<Vec<RawCell>> {
        self.rows
    }
}

fn decode_cell(field: &FieldSpec, bytes: &[u8], line: usize) -> Result<RawCell> {
    let extent = &bytes[field.offset..field.end()];
    if !extent.is_ascii() {
        return Err(Error::NonAscii {
            line,
            field: field.name.clone(),
        });
    }
    // ASCII is valid UTF-8.
    let text = std::str::from_utf8(extent).expect("ascii").trim();
    if text.is_empty() || field.is_missing_code(text) {
        Ok(None)
    } else {
        Ok(Some(text.to_string()))
    }
}

fn decode_line(schema: &Schema, bytes: &[u8], line: usize) -> Result<Vec<RawCell>> {
    let bytes = bytes.strip_suffix(b"\r").unwrap_or(bytes);
    if bytes.len() < schema.record_width() {
        return Err(Error::ShortLine {
            line,
            len: bytes.len(),
            width: schema.record_width(),
        });
    }
    schema
        .fields()
        .iter()
        .map(|field| decode_cell(field, bytes, line))
        .collect()
}

/// Decodes fixed-width records, one per line. Record numbers in errors are
/// 1-based; bytes past the record width are ignored.
pub fn parse_fixed_width(data: &[u8], schema: &Arc<Schema>) -> Result<RawDataset> {
    let mut lines: Vec<&[u8]> = data.split(|&b| b == b'\n').collect();
    if lines.last().is_some_and(|l| l.is_empty()) {
        lines.pop();
    }
    let rows = lines
        .par_iter()
        .enumerate()
        .map(|(idx, line)| decode_line(schema, line, idx + 1))
        .collect::<Result<Vec<_>>>()?;
    RawDataset::new(Arc::clone(schema), rows)
}

/// Reads comma-delimited text whose header names the schema fields in any
/// order. Empty fields are missing.
pub fn read_delimited(text: &str, schema: &Arc<Schema>) -> Result<RawDataset> {
    let mut lines: Vec<&str> = text.split('\n').collect();
    if lines.last().is_some_and(|l| l.is_empty()) {
        lines.pop();
    }
    let mut lines = lines.into_iter().map(|l| l.strip_suffix('\r').unwrap_or(l));
    let header = lines.next().unwrap_or("");
    let positions = header_positions(header, schema)?;

    let width = schema.fields().len();
    let mut rows = Vec::new();
    for (row, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != width {
            return Err(Error::RowArity {
                row,
                expected: width,
                found: cells.len(),
            });
        }
        let mut out = vec![None; width];
        for (col, cell) in cells.into_iter().enumerate() {
            if !cell.is_empty() {
                out[positions[col]] = Some(cell.to_string());
            }
        }
        rows.push(out);
    }
    RawDataset::new(Arc::clone(schema), rows)
}

/// Maps each header column to its schema field index.
fn header_positions(header: &str, schema: &Schema) -> Result<Vec<usize>> {
    let index: HashMap<&str, usize> = schema
        .fields()
        .iter()
        .enumerate()
        .map(|(i, f)| (f.name.as_str(), i))
        .collect();
    let names: Vec<&str> = if header.is_empty() && schema.fields().is_empty() {
        Vec::new()
    } else {
        header.split(',').collect()
    };
    let mut seen = vec![false; schema.fields().len()];
    let mut positions = Vec::with_capacity(names.len());
    for name in names {
        let &pos = index
            .get(name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))?;
        if seen[pos] {
            return Err(Error::DuplicateField(name.to_string()));
        }
        seen[pos] = true;
        positions.push(pos);
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::MissingColumn(schema.fields()[missing].name.clone()));
    }
    Ok(positions)
}

/// Writes a dataset as comma-delimited text in schema field order.
pub fn write_delimited(dataset: &RawDataset) -> Result<String> {
    let fields = dataset.schema().fields();
    let mut out = fields
        .iter()
        .map(|f| f.name.as_str())
        .collect::<Vec<_>>()
        .join(",");
    out.push('\n');
    for row in dataset.rows() {
        for (col, (cell, field)) in row.iter().zip(fields).enumerate() {
            if col > 0 {
                out.push(',');
            }
            if let Some(value) = cell {
                if !is_representable(value) {
                    return Err(Error::Unrepresentable {
                        field: field.name.clone(),
                        value: value.clone(),
                    });
                }
                out.push_str(value);
            }
        }
        out.push('\n');
    }
    Ok(out)
}

/// Writes a dataset as fixed-width records, one line per row. Values are
/// right-aligned in their extents and missing cells are left blank.
/// Overlapping fields must agree on the bytes they share.
pub fn write_fixed_width(dataset: &RawDataset) -> Result<Vec<u8>> {
    let schema = dataset.schema();
    let width = schema.record_width();
    let mut out = Vec::with_capacity((width + 1) * dataset.n_rows());
    let mut line = vec![b' '; width];
    let mut owner: Vec<Option<usize>> = vec![None; width];
    for row in dataset.rows() {
        line.fill(b' ');
        owner.fill(None);
        for (idx, (cell, field)) in row.iter().zip(schema.fields()).enumerate() {
            let Some(value) = cell else { continue };
            let unfit = || Error::Unrepresentable {
                field: field.name.clone(),
                value: value.clone(),
            };
            if !value.is_ascii() || value.len() > field.length || value.contains(['\n', '\r']) || value.trim() != value {
                return Err(unfit());
            }
            let start = field.end() - value.len();
            for (pos, byte) in (start..field.end()).zip(value.bytes()) {
                if owner[pos].is_some() && line[pos] != byte {
                    return Err(unfit());
                }
                line[pos] = byte;
                owner[pos] = Some(idx);
            }
        }
        out.extend_from_slice(&line);
        out.push(b'\n');
    }
    Ok(out)
}

pub(crate) fn is_representable(value: &str) -> bool {
    !value.is_empty() && !value.contains([',', '\n', '\r'])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{parse_schema, FieldKind};

    fn age_schema() -> Arc<Schema> {
        Arc::new(parse_schema("record_width 3\nage continuous 0 3 missing=999\n").unwrap())
    }

    #[test]
    fn fixed_width_round_trip() {
        let schema = Arc::new(parse_schema("record_width 8\nid categorical 0 3\nage continuous 3 5\n").unwrap());
        let raw = RawDataset::new(
            Arc::clone(&schema),
            vec![
                vec![Some("7".into()), Some("42.5".into())],
                vec![None, Some("90".into())],
            ],
        )
        .unwrap();
        let bytes = write_fixed_width(&raw).unwrap();
        assert_eq!(bytes, b"  7 42.5\n      90\n");
        assert_eq!(parse_fixed_width(&bytes, &schema).unwrap(), raw);
        let long = RawDataset::new(schema, vec![vec![Some("1234".into()), None]]).unwrap();
        assert!(write_fixed_width(&long).is_err());
    }

    #[test]
    fn slices_and_missing_codes() {
        let ds = parse_fixed_width(b"068\n999\n   \n", &age_schema()).unwrap();
        assert_eq!(
            ds.rows(),
            &[vec![Some("068".to_string())], vec![None], vec![None]]
        );
    }

    #[test]
    fn short_lines_and_non_ascii_rejected() {
        let err = parse_fixed_width(b"068\n99\n", &age_schema()).unwrap_err();
        assert!(matches!(err, Error::ShortLine { line: 2, .. }));
        let err = parse_fixed_width("0\u{e9}\n".as_bytes(), &age_schema()).unwrap_err();
        assert!(matches!(err, Error::NonAscii { line: 1, .. }));
    }

    #[test]
    fn trailing_bytes_and_crlf_ignored() {
        let ds = parse_fixed_width(b"068XYZ\r\n012\r\n", &age_schema()).unwrap();
        assert_eq!(ds.n_rows(), 2);
        assert_eq!(ds.rows()[1][0].as_deref(), Some("012"));
    }

    #[test]
    fn empty_dataset_round_trip() {
        let schema = age_schema();
        let ds = RawDataset::new(Arc::clone(&schema), vec![]).unwrap();
        let text = write_delimited(&ds).unwrap();
        assert_eq!(text, "age\n");
        assert_eq!(read_delimited(&text, &schema).unwrap().n_rows(), 0);
    }

    #[test]
    fn missing_cell_round_trip() {
        let schema = Arc::new(
            Schema::new(
                4,
                vec![
                    FieldSpec::new("a", FieldKind::Continuous, 0, 2),
                    FieldSpec::new("b", FieldKind::Categorical, 2, 2),
                ],
            )
            .unwrap(),
        );
        let ds = RawDataset::new(
            Arc::clone(&schema),
            vec![vec![Some("1".into()), None], vec![None, None]],
        )
        .unwrap();
        let text = write_delimited(&ds).unwrap();
        assert_eq!(text, "a,b\n1,\n,\n");
        assert_eq!(read_delimited(&text, &schema).unwrap(), ds);
    }

    #[test]
    fn header_order_is_free_but_names_must_match() {
        let schema = Arc::new(parse_schema("record_width 2\na continuous 0 1\nb continuous 1 1\n").unwrap());
        let ds = read_delimited("b,a\n2,1\n", &schema).unwrap();
        assert_eq!(ds.rows()[0], vec![Some("1".into()), Some("2".into())]);
        assert!(matches!(
            read_delimited("a,c\n1,2\n", &schema).unwrap_err(),
            Error::UnknownColumn(c) if c == "c"
        ));
        assert!(matches!(
            read_delimited("a\n1\n", &schema).unwrap_err(),
            Error::MissingColumn(c) if c == "b"
        ));
        assert!(matches!(
            read_delimited("a,b\n1\n", &schema).unwrap_err(),
            Error::RowArity { row: 0, expected: 2, found: 1 }
        ));
    }

    #[test]
    fn single_column_missing_row_survives() {
        let schema = age_schema();
        let ds = RawDataset::new(Arc::clone(&schema), vec![vec![None], vec![Some("70".into())]]).unwrap();
        let text = write_delimited(&ds).unwrap();
        assert_eq!(read_delimited(&text, &schema).unwrap(), ds);
    }

    #[test]
    fn commas_cannot_be_written() {
        let ds = RawDataset::new(age_schema(), vec![vec![Some("1,2".into())]]).unwrap();
        assert!(matches!(write_delimited(&ds), Err(Error::Unrepresentable { .. })));
    }
}
