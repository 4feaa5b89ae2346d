use std::sync::Arc;

use survpipe::dataset::{decode, CohortRule, CohortTag, Dataset, LabelRule};
use survpipe::ingest::{parse_fixed_width, read_delimited, write_delimited, write_fixed_width};
use survpipe::schema::{parse_schema, FieldKind, Schema};

const SCHEMA: &str = include_str!("fixtures/registry.schema");
const RECORDS: &[u8] = include_bytes!("fixtures/registry.txt");

fn schema() -> Arc<Schema> {
    Arc::new(parse_schema(SCHEMA).unwrap())
}

fn decoded() -> Dataset {
    decode(&parse_fixed_width(RECORDS, &schema()).unwrap()).unwrap()
}

fn cat(ds: &Dataset, name: &str) -> Vec<Option<String>> {
    ds.column(name).unwrap().as_categorical().unwrap().to_vec()
}

fn num(ds: &Dataset, name: &str) -> Vec<Option<f64>> {
    ds.column(name).unwrap().as_continuous().unwrap().to_vec()
}

fn codes(values: &[Option<&str>]) -> Vec<Option<String>> {
    values.iter().map(|v| v.map(str::to_string)).collect()
}

#[test]
fn layout_has_twenty_predictors() {
    let s = schema();
    assert_eq!(s.record_width(), 47);
    assert_eq!(s.fields().len(), 24);
    let continuous: Vec<&str> = s
        .fields()
        .iter()
        .filter(|f| f.kind == FieldKind::Continuous)
        .map(|f| f.name.as_str())
        .collect();
    assert_eq!(
        continuous,
        ["age", "tumor_size", "positive_nodes", "number_of_tumors", "survival_months"]
    );
    let marital = s.field("marital_status").unwrap();
    assert_eq!(marital.categories.as_ref().unwrap().len(), 7);
    assert_eq!((s.field("cause_of_death").unwrap().offset, s.field("cause_of_death").unwrap().length), (39, 5));
}

#[test]
fn records_decode_to_hand_values() {
    let ds = decoded();
    assert_eq!(ds.n_rows(), 3);
    assert_eq!(cat(&ds, "marital_status"), codes(&[Some("2"), None, Some("5")]));
    assert_eq!(num(&ds, "age"), vec![Some(68.0), None, Some(81.0)]);
    assert_eq!(cat(&ds, "primary_site"), codes(&[Some("C182"), Some("C209"), Some("C187")]));
    assert_eq!(cat(&ds, "histology"), codes(&[Some("8140"), Some("8480"), Some("8140")]));
    assert_eq!(cat(&ds, "grade"), codes(&[Some("2"), None, Some("3")]));
    // 888 and 999 are both "unknown size" codes
    assert_eq!(num(&ds, "tumor_size"), vec![Some(45.0), None, Some(12.0)]);
    assert_eq!(cat(&ds, "extension"), codes(&[Some("40"), None, Some("20")]));
    assert_eq!(cat(&ds, "metastasis"), codes(&[Some("00"), None, Some("10")]));
    assert_eq!(num(&ds, "positive_nodes"), vec![Some(0.0), None, Some(3.0)]);
    assert_eq!(cat(&ds, "surgery_site"), codes(&[Some("40"), None, Some("30")]));
    assert_eq!(num(&ds, "number_of_tumors"), vec![Some(1.0), Some(2.0), Some(1.0)]);
    assert_eq!(cat(&ds, "summary_stage"), codes(&[Some("1"), None, Some("3")]));
    assert_eq!(num(&ds, "survival_months"), vec![Some(13.0), Some(60.0), Some(30.0)]);
    assert_eq!(cat(&ds, "cause_of_death"), codes(&[Some("21040"), Some("00000"), Some("21050")]));
    assert_eq!(cat(&ds, "race"), codes(&[Some("1"), Some("1"), Some("2")]));
    assert_eq!(cat(&ds, "hispanic_origin"), codes(&[Some("0"), Some("6"), Some("0")]));
}

#[test]
fn labels_cohorts_and_deletion() {
    let ds = decoded().derive_labels(&LabelRule::default()).unwrap();
    // 13 months and a colorectal cause is the only negative
    assert_eq!(ds.labels().unwrap(), &[false, true, true]);
    assert_eq!(
        ds.cohort_tags(&CohortRule::default()).unwrap(),
        vec![CohortTag::White, CohortTag::Hispanic, CohortTag::Excluded]
    );
    let kept = ds.drop_required_missing(&["age", "number_of_tumors"]).unwrap();
    assert_eq!(kept.n_rows(), 2);
    assert_eq!(num(&kept, "age"), vec![Some(68.0), Some(81.0)]);
}

#[test]
fn delimited_and_fixed_width_round_trips() {
    let s = schema();
    let raw = parse_fixed_width(RECORDS, &s).unwrap();
    let csv = write_delimited(&raw).unwrap();
    assert_eq!(read_delimited(&csv, &s).unwrap(), raw);
    let bytes = write_fixed_width(&raw).unwrap();
    assert_eq!(parse_fixed_width(&bytes, &s).unwrap(), raw);
}

#[test]
fn crlf_and_trailing_bytes_are_tolerated() {
    let s = schema();
    let text = std::str::from_utf8(RECORDS).unwrap();
    let crlf: String = text.lines().map(|l| format!("{l}   extra\r\n")).collect();
    assert_eq!(
        parse_fixed_width(crlf.as_bytes(), &s).unwrap(),
        parse_fixed_width(RECORDS, &s).unwrap()
    );
}
