//! Declarative record layouts.
//!
//! A schema file is line oriented:
//!
//! ```text
//! # comment
//! record_width 12
//! age      continuous  0 3 missing=999
//! sex      categorical 3 1 missing=9 categories=1,2
//! ```
//!
//! Each field line is `name kind offset length [missing=..] [categories=..]`
//! with a 0-based byte offset. Byte ranges may overlap.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column name reserved for labels in delimited files.
pub const LABEL_COLUMN: &str = "__label";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Categorical,
    Continuous,
}

impl fmt::Display for FieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FieldKind::Categorical => "categorical",
            FieldKind::Continuous => "continuous",
        })
    }
}

impl FromStr for FieldKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "categorical" => Ok(FieldKind::Categorical),
            "continuous" => Ok(FieldKind::Continuous),
            other => Err(format!("unknown field kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldSpec {
    pub name: String,
    pub kind: FieldKind,
    pub offset: usize,
    pub length: usize,
    pub missing_codes: Vec<String>,
    /// Valid codes, categorical fields only.
    pub categories: Option<Vec<String>>,
}

impl FieldSpec {
    pub fn new(name: impl Into<String>, kind: FieldKind, offset: usize, length: usize) -> Self {
        FieldSpec {
            name: name.into(),
            kind,
            offset,
            length,
            missing_codes: Vec::new(),
            categories: None,
        }
    }

    pub fn with_missing<S: Into<String>>(mut self, codes: impl IntoIterator<Item = S>) -> Self {
        self.missing_codes = codes.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_categories<S: Into<String>>(mut self, codes: impl IntoIterator<Item = S>) -> Self {
        self.categories = Some(codes.into_iter().map(Into::into).collect());
        self
    }

    pub fn end(&self) -> usize {
        self.offset + self.length
    }

    pub fn is_missing_code(&self, value: &str) -> bool {
        self.missing_codes.iter().any(|c| c == value)
    }

    fn validate(&self, record_width: usize) -> Result<()> {
        let invalid = |reason: &str| Error::InvalidField {
            name: self.name.clone(),
            reason: reason.to_string(),
        };
        if self.name.is_empty()
            || self.name == LABEL_COLUMN
            || self
                .name
                .chars()
                .any(|c| c == ',' || c == '=' || c.is_whitespace())
        {
            return Err(invalid("names must be non-empty, free of `,`, `=` and whitespace, and not reserved"));
        }
        if self.length == 0 {
            return Err(invalid("byte length must be at least 1"));
        }
        if self.end() > record_width {
            return Err(Error::FieldOutOfBounds {
                name: self.name.clone(),
                offset: self.offset,
                length: self.length,
                width: record_width,
            });
        }
        if let Some(categories) = &self.categories {
            if self.kind != FieldKind::Categorical {
                return Err(invalid("only categorical fields may declare categories"));
            }
            if let Some(code) = categories.iter().find(|c| self.is_missing_code(c)) {
                return Err(invalid(&format!("`{code}` is both a category and a missing code")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    record_width: usize,
    fields: Vec<FieldSpec>,
}

impl Schema {
    pub fn new(record_width: usize, fields: Vec<FieldSpec>) -> Result<Self> {
        let mut seen = HashSet::new();
        for field in &fields {
            field.validate(record_width)?;
            if !seen.insert(field.name.as_str()) {
                return Err(Error::DuplicateField(field.name.clone()));
            }
        }
        Ok(Schema {
            record_width,
            fields,
        })
    }

    pub fn record_width(&self) -> usize {
        self.record_width
    }

    pub fn fields(&self) -> &[FieldSpec] {
        &self.fields
    }

    pub fn field(&self, name: &str) -> Option<&FieldSpec> {
        self.fields.iter().find(|f| f.name == name)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.fields.iter().position(|f| f.name == name)
    }

    /// Renders the schema in the schema-file grammar.
    pub fn to_text(&self) -> String {
        let mut out = format!("record_width {}\n", self.record_width);
        for field in &self.fields {
            out.push_str(&format!(
                "{} {} {} {}",
                field.name, field.kind, field.offset, field.length
            ));
            if !field.missing_codes.is_empty() {
                out.push_str(&format!(" missing={}", field.missing_codes.join(",")));
            }
            if let Some(categories) = &field.categories {
                out.push_str(&format!(" categories={}", categories.join(",")));
            }
            out.push('\n');
        }
        out
    }
}

/// Parses schema-file text.
pub fn parse_schema(text: &str) -> Result<Schema> {
    let mut record_width: Option<usize> = None;
    let mut fields = Vec::new();

    for (line_idx, raw_line) in text.lines().enumerate() {
        let line_no = line_idx + 1;
        let content = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        };
        let tokens = tokenize(content);
        let Some(&(first_col, first)) = tokens.first() else {
            continue;
        };
        let syntax = |column: usize, message: String| Error::SchemaSyntax {
            line: line_no,
            column,
            message,
        };

        if first == "record_width" {
            if record_width.is_some() {
                return Err(syntax(first_col, "record_width declared twice".into()));
            }
            match tokens.as_slice() {
                [_, (col, value)] => {
                    let width = value
                        .parse::<usize>()
                        .map_err(|_| syntax(*col, format!("`{value}` is not a byte count")))?;
                    record_width = Some(width);
                }
                _ => {
                    return Err(syntax(
                        first_col,
                        "expected `record_width N`".into(),
                    ))
                }
            }
            continue;
        }

        if tokens.len() < 4 {
            let col = tokens.last().map(|t| t.0 + t.1.len()).unwrap_or(first_col);
            return Err(syntax(col, "expected `name kind offset length`".into()));
        }
        let (kind_col, kind_tok) = tokens[1];
        let kind = kind_tok
            .parse::<FieldKind>()
            .map_err(|msg| syntax(kind_col, msg))?;
        let number = |idx: usize| -> Result<usize> {
            let (col, tok) = tokens[idx];
            tok.parse::<usize>()
                .map_err(|_| syntax(col, format!("`{tok}` is not a non-negative integer")))
        };
        let offset = number(2)?;
        let length = number(3)?;
        let mut field = FieldSpec::new(first, kind, offset, length);

        for &(col, tok) in &tokens[4..] {
            let Some((key, value)) = tok.split_once('=') else {
                return Err(syntax(col, format!("expected key=value, found `{tok}`")));
            };
            let values: Vec<String> = value
                .split(',')
                .filter(|v| !v.is_empty())
                .map(str::to_string)
                .collect();
            match key {
                "missing" => field.missing_codes = values,
                "categories" => field.categories = Some(values),
                other => return Err(syntax(col, format!("unknown attribute `{other}`"))),
            }
        }
        fields.push(field);
    }

    let width = record_width.ok_or_else(|| Error::SchemaSyntax {
        line: text.lines().count().max(1),
        column: 1,
        message: "missing `record_width` line".into(),
    })?;
    Schema::new(width, fields)
}

/// Splits on whitespace, keeping 1-based character columns.
fn tokenize(line: &str) -> Vec<(usize, &str)> {
    let mut tokens = Vec::new();
    let mut start: Option<usize> = None;
    for (idx, ch) in line.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                tokens.push((s, &line[s..idx]));
            }
        } else if start.is_none() {
            start = Some(idx);
        }
    }
    if let Some(s) = start {
        tokens.push((s, &line[s..]));
    }
    tokens
        .into_iter()
        .map(|(byte, tok)| (line[..byte].chars().count() + 1, tok))
        .collect()
}
