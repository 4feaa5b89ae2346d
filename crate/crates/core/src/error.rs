use thiserror::Error;

use crate::models::ModelKind;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema line {line}, column {column}: {message}")]
    SchemaSyntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("duplicate field name `{0}`")]
    DuplicateField(String),
    #[error("field `{name}` (offset {offset}, length {length}) exceeds record width {width}")]
    FieldOutOfBounds {
        name: String,
        offset: usize,
        length: usize,
        width: usize,
    },
    #[error("invalid field `{name}`: {reason}")]
    InvalidField { name: String, reason: String },
    #[error("record {line}: {len} bytes, schema requires {width}")]
    ShortLine { line: usize, len: usize, width: usize },
    #[error("record {line}: non-ASCII byte in field `{field}`")]
    NonAscii { line: usize, field: String },
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("column `{0}` is missing")]
    MissingColumn(String),
    #[error("row {row}: expected {expected} fields, found {found}")]
    RowArity {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}, field `{field}`: cannot parse `{value}` as a finite number")]
    BadNumber {
        row: usize,
        field: String,
        value: String,
    },
    #[error("field `{field}`: value `{value}` cannot be written as a delimited cell")]
    Unrepresentable { field: String, value: String },
    #[error("invalid synthetic spec: {0}")]
    InvalidSynthSpec(String),
    #[error("field `{field}` must be {expected}")]
    WrongKind {
        field: String,
        expected: &'static str,
    },
    #[error("invalid {what}: {reason}")]
    InvalidParameter { what: &'static str, reason: String },
    #[error("dataset has no labels")]
    Unlabeled,
    #[error("both classes must be present")]
    SingleClass,
    #[error("field `{field}` is missing at row {row}")]
    MissingValue { field: String, row: usize },
    #[error("field `{0}` has no observed values")]
    NoObservedValues(String),
    #[error("regression for `{0}` is singular even after ridge regularization")]
    SingularSystem(String),
    #[error("expected {expected} columns, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("feature map fingerprint does not match the model")]
    FingerprintMismatch,
    #[error("model file: {0}")]
    ModelFormat(String),
    #[error("model file holds a {found} model, expected {expected}")]
    KindMismatch { expected: ModelKind, found: ModelKind },
    #[error("{0} models do not provide feature importance")]
    UnsupportedKind(ModelKind),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("every cross-validation fold was skipped")]
    AllFoldsSkipped,
    #[error("model grids differ between manifests")]
    MismatchedGrids,
    #[error("configuration: {0}")]
    Config(String),
    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Whether the error stems from the configuration (schema, parameters,
    /// experiment file) rather than from the data being processed.
    pub fn is_config_error(&self) -> bool {
        match self {
            Error::SchemaSyntax { .. }
            | Error::DuplicateField(_)
            | Error::FieldOutOfBounds { .. }
            | Error::InvalidField { .. }
            | Error::InvalidSynthSpec(_)
            | Error::InvalidParameter { .. }
            | Error::MismatchedGrids
            | Error::Config(_) => true,
            Error::Stage { source, .. } => source.is_config_error(),
            _ => false,
        }
    }

    /// Wraps the error with the name of the pipeline stage that raised it.
    pub fn in_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }

    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            what,
            reason: reason.into(),
        }
    }
}
