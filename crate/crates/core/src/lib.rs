//! Cancer survivability prediction from fixed-width registry extracts.
//!
//! The pipeline reads records against a schema, derives binary survival
//! labels, partitions patients into ethnicity cohorts, imputes missing
//! values by chained equations, one-hot encodes, and trains logistic
//! regression, random forest, AdaBoost and MLP classifiers with optional
//! undersampling or cost-sensitive weights. Evaluation reports AUC, G-mean
//! and feature rankings per cohort.

pub mod dataset;
pub mod encode;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod imbalance;
pub mod ingest;
pub mod mice;
pub mod models;
pub mod ranking;
pub mod schema;
pub mod seed;
pub mod split;
pub mod synth;

pub use error::{Error, Result};
