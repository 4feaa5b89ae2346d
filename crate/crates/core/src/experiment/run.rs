//! The per-cohort pipeline and its artifacts.
//!
//! For each cohort: filter rows, split train/test, impute (fit on train,
//! applied to test), fit the encoder and standardizer on train, then for
//! every (imbalance plan, model kind) pair select hyperparameters by k-fold
//! cross-validation on the training rows, retrain the winner on all training
//! rows and score it on the test rows.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{DataSource, ExperimentConfig};
use super::report::{metrics_csv, run_reports};
use crate::dataset::{class_counts, decode, Cohort, Dataset};
use crate::encode::{encode, fit_encoder, EncodedMatrix, FeatureMap, Standardizer};
use crate::error::{Error, Result};
use crate::eval::{cross_validate, evaluate, CvOptions, Metrics};
use crate::imbalance::{ImbalanceMethod, ImbalancePlan};
use crate::ingest::{parse_fixed_width, read_delimited};
use crate::mice::fit_mice;
use crate::models::{save_model, train, ModelKind, TrainConfig};
use crate::ranking::importance;
use crate::schema::parse_schema;
use crate::seed::derive_seed;
use crate::synth::{generate_synthetic, SynthSpec};

/// Outcome of one (cohort, model kind, imbalance plan) job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobResult {
    pub cohort: Cohort,
    pub model: ModelKind,
    pub imbalance: ImbalanceMethod,
    /// Position of the selected configuration in the full model grid.
    pub selected_grid_index: usize,
    pub selected: TrainConfig,
    /// Mean cross-validation metric per candidate, in grid order.
    pub cv_means: Vec<f64>,
    pub metrics: Metrics,
    /// Features by descending importance; absent for MLP models.
    pub ranking: Option<Vec<(String, f64)>>,
    pub model_file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSummary {
    pub cohort: Cohort,
    pub train_rows: usize,
    pub test_rows: usize,
    /// `(positives, negatives)` among training rows.
    pub train_classes: (usize, usize),
    pub test_classes: (usize, usize),
    pub n_columns: usize,
}

/// Reproducibility record of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub stage_seeds: BTreeMap<String, u64>,
    /// Seconds per stage.
    pub timings: BTreeMap<String, f64>,
    pub artifacts: Vec<String>,
    pub cohorts_run: Vec<Cohort>,
    pub kinds: Vec<ModelKind>,
    pub methods: Vec<ImbalanceMethod>,
    pub grid: Vec<TrainConfig>,
    pub top_k: usize,
    pub cohorts: Vec<CohortSummary>,
    pub results: Vec<JobResult>,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("manifest: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        RunManifest::from_json(&text)
    }
}

/// Seeds and timings gathered while the run progresses.
#[derive(Default)]
struct Ledger {
    seeds: Mutex<BTreeMap<String, u64>>,
    timings: Mutex<BTreeMap<String, f64>>,
}

impl Ledger {
    fn seed(&self, master: u64, stage: &str) -> u64 {
        let s = derive_seed(master, stage);
        self.seeds.lock().expect("seed ledger").insert(stage.to_string(), s);
        s
    }

    fn time<T>(&self, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f().map_err(|e| e.in_stage(stage));
        self.timings
            .lock()
            .expect("timing ledger")
            .insert(stage.to_string(), start.elapsed().as_secs_f64());
        out
    }
}

/// Reads or generates the records named by the configuration.
pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    match &cfg.data {
        DataSource::Synthetic {
            n_rows,
            signal_scale,
            spec,
        } => {
            let spec = spec
                .clone()
                .unwrap_or_else(|| SynthSpec::registry_default(*n_rows, derive_seed(cfg.seed, "synth")))
                .with_signal_scale(*signal_scale);
            decode(&generate_synthetic(&spec)?.raw)
        }
        DataSource::FixedWidth { path, schema } | DataSource::Delimited { path, schema } => {
            let schema_text = fs::read_to_string(schema).map_err(|e| Error::Config(format!("{}: {e}", schema.display())))?;
            let schema = Arc::new(parse_schema(&schema_text)?);
            let raw = if matches!(cfg.data, DataSource::FixedWidth { .. }) {
                parse_fixed_width(&fs::read(path)?, &schema)?
            } else {
                read_delimited(&fs::read_to_string(path)?, &schema)?
            };
            decode(&raw)
        }
    }
}

/// Predictor names: the configured list, or every field that is not a
/// label or cohort field.
pub fn feature_names(cfg: &ExperimentConfig, ds: &Dataset) -> Vec<String> {
    if let Some(f) = &cfg.features {
        return f.clone();
    }
    let bookkeeping = [
        &cfg.label.survival_field,
        &cfg.label.cause_field,
        &cfg.cohort_rule.race_field,
        &cfg.cohort_rule.origin_field,
    ];
    ds.column_names()
        .filter(|n| !bookkeeping.iter().any(|b| b.as_str() == *n))
        .map(str::to_string)
        .collect()
}

/// Labeled rows after deletion of rows missing required fields.
pub fn labeled_rows(cfg: &ExperimentConfig, ds: &Dataset) -> Result<Dataset> {
    ds.derive_labels(&cfg.label)?.drop_required_missing(&cfg.required)
}

/// Encoded, standardized training and test rows of one cohort.
#[derive(Debug, Clone)]
pub struct PreparedCohort {
    pub train: EncodedMatrix,
    pub test: EncodedMatrix,
    pub map: Arc<FeatureMap>,
    pub standardizer: Standardizer,
    pub summary: CohortSummary,
}

/// Runs the leakage-free preparation for one cohort of labeled rows.
pub fn prepare_cohort(cfg: &ExperimentConfig, labeled: &Dataset, cohort: Cohort, split_seed: u64) -> Result<PreparedCohort> {
    let rows = labeled
        .filter_cohort(&cfg.cohort_rule, cohort)?
        .select_columns(&feature_names(cfg, labeled))?;
    let (p, n) = class_counts(rows.require_labels()?);
    if p == 0 || n == 0 {
        return Err(Error::SingleClass);
    }
    let (train_raw, test_raw) = if cfg.impute_before_split {
        let (all, _) = fit_mice(&rows, &cfg.impute)?;
        all.split(cfg.test_fraction, split_seed)?
    } else {
        let (train_rows, test_rows) = rows.split(cfg.test_fraction, split_seed)?;
        let (train_imp, model) = fit_mice(&train_rows, &cfg.impute)?;
        let test_imp = model.apply(&test_rows)?;
        (train_imp, test_imp)
    };
    let map = Arc::new(fit_encoder(&train_raw));
    let train_enc = encode(&train_raw, &map)?;
    let test_enc = encode(&test_raw, &map)?;
    let standardizer = Standardizer::fit(&train_enc);
    let train = standardizer.transform(&train_enc);
    let test = standardizer.transform(&test_enc);
    let summary = CohortSummary {
        cohort,
        train_rows: train.n_rows(),
        test_rows: test.n_rows(),
        train_classes: class_counts(train.require_labels()?),
        test_classes: class_counts(test.require_labels()?),
        n_columns: train.n_cols(),
    };
    Ok(PreparedCohort {
        train,
        test,
        map,
        standardizer,
        summary,
    })
}

struct JobOutput {
    result: JobResult,
    cv_csv: String,
}

#[allow(clippy::too_many_arguments)]
fn run_job(
    cfg: &ExperimentConfig,
    ledger: &Ledger,
    prepared: &PreparedCohort,
    cohort: Cohort,
    kind: ModelKind,
    plan: &ImbalancePlan,
    models_dir: &Path,
) -> Result<JobOutput> {
    let stage = format!("{cohort}/{}/{kind}", plan.method);
    let grid_index: Vec<usize> = (0..cfg.models.len()).filter(|&i| cfg.models[i].kind() == kind).collect();
    let grid: Vec<TrainConfig> = grid_index
        .iter()
        .map(|&i| {
            let mut c = cfg.models[i].clone();
            c.seed = ledger.seed(cfg.seed, &format!("model/{cohort}/{kind}/{}", c.seed));
            c
        })
        .collect();
    let mut plan = plan.clone();
    plan.seed = ledger.seed(cfg.seed, &format!("imbalance/{cohort}/{}", plan.method));
    let opts = CvOptions {
        k: cfg.k,
        seed: ledger.seed(cfg.seed, &format!("cv/{cohort}")),
        metric: cfg.metric,
        threshold: cfg.threshold,
    };
    ledger.time(&stage, || {
        let cv = cross_validate(&prepared.train, &grid, &plan, &opts)?;
        let (rows, weights) = plan.prepare(&prepared.train)?;
        let model = train(&rows, &weights, &cv.selected_config)?;
        let probs = model.predict_proba(&prepared.test)?;
        let metrics = evaluate(&probs, prepared.test.require_labels()?, cfg.threshold)?;
        let ranking = match importance(&model, &prepared.map) {
            Ok(imp) => Some(imp.ranked()),
            Err(Error::UnsupportedKind(_)) => None,
            Err(e) => return Err(e),
        };
        let file = format!("{cohort}-{kind}-{}.bin", plan.method);
        save_model(&model, &models_dir.join(&file))?;
        let mut cv_csv = String::new();
        for row in &cv.table {
            cv_csv.push_str(&format!(
                "{cohort},{kind},{},{},{},{:.6},{:.6}\n",
                plan.method, grid_index[row.grid_index], row.fold, row.auc, row.g_mean
            ));
        }
        Ok(JobOutput {
            result: JobResult {
                cohort,
                model: kind,
                imbalance: plan.method,
                selected_grid_index: grid_index[cv.selected],
                selected: cfg.models[grid_index[cv.selected]].clone(),
                cv_means: cv.means,
                metrics,
                ranking,
                model_file: format!("models/{file}"),
            },
            cv_csv,
        })
    })
}

/// Runs the whole experiment, writing reports, models and `manifest.json`
/// under `out`.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<RunManifest> {
    cfg.validate()?;
    let ledger = Ledger::default();
    let models_dir = out.join("models");
    fs::create_dir_all(&models_dir)?;
    if let DataSource::Synthetic { spec: None, .. } = cfg.data {
        ledger.seed(cfg.seed, "synth");
    }
    let data = ledger.time("ingest", || load_dataset(cfg))?;
    let labeled = ledger.time("label", || labeled_rows(cfg, &data))?;
    drop(data);

    let kinds = cfg.kinds();
    let methods: Vec<ImbalanceMethod> = cfg.imbalance.iter().map(|p| p.method).collect();
    let mut artifacts = Vec::new();
    let mut summaries = Vec::new();
    let mut outputs = Vec::new();
    for &cohort in &cfg.cohorts {
        let split_seed = ledger.seed(cfg.seed, &format!("split/{cohort}"));
        let prepared = ledger.time(&format!("{cohort}/prepare"), || prepare_cohort(cfg, &labeled, cohort, split_seed))?;
        let map_file = format!("models/{cohort}.features.json");
        fs::write(out.join(&map_file), prepared.map.to_json())?;
        let std_file = format!("models/{cohort}.standardizer.json");
        fs::write(
            out.join(&std_file),
            serde_json::to_string_pretty(&prepared.standardizer).expect("standardizer serializes"),
        )?;
        artifacts.extend([map_file, std_file]);
        summaries.push(prepared.summary.clone());

        let jobs: Vec<(&ImbalancePlan, ModelKind)> =
            cfg.imbalance.iter().flat_map(|p| kinds.iter().map(move |&k| (p, k))).collect();
        let done = jobs
            .par_iter()
            .map(|&(plan, kind)| run_job(cfg, &ledger, &prepared, cohort, kind, plan, &models_dir))
            .collect::<Result<Vec<_>>>()?;
        outputs.extend(done);
    }

    let results: Vec<JobResult> = outputs.iter().map(|o| o.result.clone()).collect();
    artifacts.extend(results.iter().map(|r| r.model_file.clone()));
    for report in run_reports(&results, &cfg.cohorts, &kinds, &methods, cfg.top_k) {
        for (ext, body) in [("txt", report.text.to_text()), ("csv", report.csv.to_csv())] {
            let file = format!("{}.{ext}", report.name);
            fs::write(out.join(&file), body)?;
            artifacts.push(file);
        }
    }
    let mut cv = String::from("cohort,model,imbalance,grid_index,fold,auc,g_mean\n");
    for o in &outputs {
        cv.push_str(&o.cv_csv);
    }
    fs::write(out.join("cv.csv"), cv)?;
    fs::write(out.join("metrics.csv"), metrics_csv(&results))?;
    artifacts.extend(["cv.csv".to_string(), "metrics.csv".to_string(), "manifest.json".to_string()]);

    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: cfg.hash(),
        master_seed: cfg.seed,
        stage_seeds: ledger.seeds.into_inner().expect("seed ledger"),
        timings: ledger.timings.into_inner().expect("timing ledger"),
        artifacts,
        cohorts_run: cfg.cohorts.clone(),
        kinds,
        methods,
        grid: cfg.models.clone(),
        top_k: cfg.top_k,
        cohorts: summaries,
        results,
    };
    fs::write(out.join("manifest.json"), manifest.to_json())?;
    Ok(manifest)
}
