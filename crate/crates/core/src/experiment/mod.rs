//! Experiment orchestration: one declarative file drives ingestion,
//! preprocessing, model selection, evaluation and ranking per cohort.

pub mod config;
pub mod report;
pub mod run;

pub use config::{DataSource, ExperimentConfig};
pub use report::{compare_cohorts, Comparison, Table};
pub use run::{
    feature_names, labeled_rows, load_dataset, prepare_cohort, run_experiment, CohortSummary, JobResult,
    PreparedCohort, RunManifest,
};

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "SURVPIPE_THREADS";

/// Sizes the global worker pool from `SURVPIPE_THREADS` when it is set.
/// Has no effect once the pool exists.
pub fn configure_threads() -> crate::Result<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| crate::Error::Config(format!("{THREADS_ENV}={value} is not a positive integer")))?;
    if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
        log::debug!("worker pool already initialized; {THREADS_ENV} ignored");
    }
    Ok(())
}
