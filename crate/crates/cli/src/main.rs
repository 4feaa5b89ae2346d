//! `survpipe` command-line front end.
//!
//! Exit codes: 0 on success, 2 for configuration errors (bad flags, schema,
//! parameters or experiment files), 3 for data errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use survpipe::dataset::{Cohort, CohortRule, Dataset, LabelRule};
use survpipe::encode::{encode, fit_encoder, EncodedMatrix, FeatureMap, Standardizer};
use survpipe::eval::{cross_validate, evaluate, roc_points, CvOptions, SelectionMetric};
use survpipe::experiment::{compare_cohorts, configure_threads, run_experiment, ExperimentConfig, RunManifest};
use survpipe::imbalance::{ImbalanceMethod, ImbalancePlan};
use survpipe::ingest::{parse_fixed_width, read_delimited, write_delimited, write_fixed_width};
use survpipe::mice::{fit_mice, ImputePlan, InitialFill, MiceModel};
use survpipe::models::{load_model, save_model, train, ModelKind, ModelParams, TrainConfig};
use survpipe::ranking::{importance, rank_table};
use survpipe::schema::{parse_schema, Schema};
use survpipe::synth::{generate_synthetic, synthetic_schema, SynthSpec};
use survpipe::{Error, Result};

#[derive(Parser)]
#[command(name = "survpipe", version, about = "Cancer survivability prediction pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate records against a schema and write them as comma-delimited
    /// text.
    Ingest {
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = InputFormat::Fixed)]
        format: InputFormat,
        /// Destination; standard output when absent.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Generate a synthetic registry-shaped extract and its schema.
    Synth {
        #[arg(long, default_value_t = 20000)]
        rows: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Generator spec (TOML); the registry-shaped default when absent.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Multiplies every generator shift and tilt.
        #[arg(long, default_value_t = 1.0)]
        signal_scale: f64,
        #[arg(long)]
        output: PathBuf,
        /// Also write the schema describing the records.
        #[arg(long)]
        schema_output: Option<PathBuf>,
        /// Write comma-delimited text instead of fixed-width records.
        #[arg(long)]
        csv: bool,
    },
    /// Preprocessing steps over comma-delimited datasets.
    #[command(subcommand)]
    Prep(Prep),
    /// Train one model on an encoded matrix.
    Train {
        #[arg(long)]
        model: ModelKind,
        /// Hyperparameters (TOML); defaults when absent.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        matrix: MatrixArgs,
        #[command(flatten)]
        imbalance: ImbalanceArgs,
        #[arg(long)]
        output: PathBuf,
    },
    /// Score a model on a labeled encoded matrix.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        matrix: MatrixArgs,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        /// Metric printed first.
        #[arg(long, default_value = "auc")]
        metric: SelectionMetric,
        /// Also write ROC points to this file.
        #[arg(long)]
        roc: Option<PathBuf>,
    },
    /// Cross-validate a hyperparameter grid on an encoded matrix.
    Cv {
        /// TOML file with a `[[models]]` array.
        #[arg(long)]
        grid: PathBuf,
        #[command(flatten)]
        matrix: MatrixArgs,
        #[command(flatten)]
        imbalance: ImbalanceArgs,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "auc")]
        metric: SelectionMetric,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
    },
    /// Rank original features by model importance.
    Rank {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        map: PathBuf,
        #[arg(long, default_value_t = 7)]
        top: usize,
        /// Also write the ranking as comma-delimited text.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run a full experiment from a configuration file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Report directory; overrides the configuration.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the results of several runs.
    Compare {
        /// `manifest.json` files of the runs.
        #[arg(required = true, num_args = 2..)]
        manifests: Vec<PathBuf>,
        /// Write the tables here as well as printing them.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum InputFormat {
    Fixed,
    Csv,
}

#[derive(Subcommand)]
enum Prep {
    /// Derive two-year survival labels.
    Label {
        #[command(flatten)]
        io: DatasetIo,
        /// Label rule (TOML); the registry default when absent.
        #[arg(long)]
        rule: Option<PathBuf>,
    },
    /// Delete rows missing any of the given fields.
    Drop {
        #[command(flatten)]
        io: DatasetIo,
        #[arg(long, value_delimiter = ',', required = true)]
        fields: Vec<String>,
    },
    /// Keep one cohort.
    Cohort {
        #[command(flatten)]
        io: DatasetIo,
        #[arg(long)]
        cohort: Cohort,
        /// Cohort rule (TOML); the registry default when absent.
        #[arg(long)]
        rule: Option<PathBuf>,
    },
    /// Fill missing values by chained equations.
    Impute {
        #[command(flatten)]
        io: DatasetIo,
        #[arg(long, value_delimiter = ',')]
        targets: Option<Vec<String>>,
        #[arg(long, default_value_t = 10)]
        cycles: usize,
        #[arg(long)]
        median: bool,
        /// Save the fitted imputation model.
        #[arg(long, conflicts_with = "apply")]
        model_output: Option<PathBuf>,
        /// Impute with a previously fitted model instead of fitting.
        #[arg(long)]
        apply: Option<PathBuf>,
    },
    /// One-hot encode into a numeric matrix.
    Encode {
        #[command(flatten)]
        io: DatasetIo,
        /// Reuse this feature map instead of fitting one.
        #[arg(long)]
        map: Option<PathBuf>,
        #[arg(long, conflicts_with = "map")]
        map_output: Option<PathBuf>,
        /// Reuse these standardization statistics.
        #[arg(long)]
        standardizer: Option<PathBuf>,
        /// Fit and save standardization statistics.
        #[arg(long, conflicts_with = "standardizer")]
        standardizer_output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct DatasetIo {
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct MatrixArgs {
    /// Encoded matrix (comma-delimited).
    #[arg(long)]
    input: PathBuf,
    /// Feature map (JSON) the matrix was encoded with.
    #[arg(long)]
    map: PathBuf,
}

#[derive(Args)]
struct ImbalanceArgs {
    #[arg(long, default_value = "none")]
    imbalance: ImbalanceMethod,
    #[arg(long, default_value_t = 1.0)]
    ratio: f64,
    #[arg(long, default_value_t = 5.0)]
    factor: f64,
}

impl ImbalanceArgs {
    fn plan(&self, seed: u64) -> ImbalancePlan {
        ImbalancePlan {
            method: self.imbalance,
            ratio: self.ratio,
            factor: self.factor,
            seed,
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    Ok(fs::read_to_string(path)?)
}

/// Reads a file whose contents configure the run; failures are
/// configuration errors.
fn read_config_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    toml::from_str(&read_config_text(path)?).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn read_schema(path: &Path) -> Result<Arc<Schema>> {
    Ok(Arc::new(parse_schema(&read_config_text(path)?)?))
}

fn read_map(path: &Path) -> Result<Arc<FeatureMap>> {
    Ok(Arc::new(FeatureMap::from_json(&read_config_text(path)?)?))
}

fn read_matrix(args: &MatrixArgs) -> Result<EncodedMatrix> {
    EncodedMatrix::from_delimited(&read_text(&args.input)?, read_map(&args.map)?)
}

fn write(path: &Path, body: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    Ok(fs::write(path, body)?)
}

fn with_dataset(io: &DatasetIo, step: impl FnOnce(&Dataset) -> Result<Dataset>) -> Result<()> {
    let schema = read_schema(&io.schema)?;
    let ds = Dataset::from_delimited(&read_text(&io.input)?, &schema)?;
    let out = step(&ds)?;
    log::info!("{} rows in, {} rows out", ds.n_rows(), out.n_rows());
    write(&io.output, out.to_delimited()?)
}

fn prep(cmd: Prep) -> Result<()> {
    match cmd {
        Prep::Label { io, rule } => {
            let rule: LabelRule = rule.map(|p| read_toml(&p)).transpose()?.unwrap_or_default();
            rule.validate()?;
            with_dataset(&io, |ds| ds.derive_labels(&rule))
        }
        Prep::Drop { io, fields } => with_dataset(&io, |ds| ds.drop_required_missing(&fields)),
        Prep::Cohort { io, cohort, rule } => {
            let rule: CohortRule = rule.map(|p| read_toml(&p)).transpose()?.unwrap_or_default();
            rule.validate()?;
            with_dataset(&io, |ds| ds.filter_cohort(&rule, cohort))
        }
        Prep::Impute {
            io,
            targets,
            cycles,
            median,
            model_output,
            apply,
        } => {
            if let Some(path) = apply {
                let model: MiceModel = serde_json::from_str(&read_config_text(&path)?)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                return with_dataset(&io, |ds| model.apply(ds));
            }
            let mut plan = ImputePlan {
                cycles,
                fill: if median { InitialFill::Median } else { InitialFill::Mean },
                ..ImputePlan::default()
            };
            if let Some(t) = targets {
                plan.targets = t;
            }
            with_dataset(&io, |ds| {
                let (out, model) = fit_mice(ds, &plan)?;
                log::info!("largest change per cycle: {:?}", model.cycle_changes());
                if let Some(path) = &model_output {
                    write(path, serde_json::to_string_pretty(&model).expect("model serializes"))?;
                }
                Ok(out)
            })
        }
        Prep::Encode {
            io,
            map,
            map_output,
            standardizer,
            standardizer_output,
        } => {
            let schema = read_schema(&io.schema)?;
            let ds = Dataset::from_delimited(&read_text(&io.input)?, &schema)?;
            let map = match map {
                Some(p) => read_map(&p)?,
                None => Arc::new(fit_encoder(&ds)),
            };
            let mut matrix = encode(&ds, &map)?;
            if let Some(p) = standardizer {
                let s: Standardizer = serde_json::from_str(&read_config_text(&p)?)
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
                matrix = s.transform(&matrix);
            } else if let Some(p) = standardizer_output {
                let s = Standardizer::fit(&matrix);
                matrix = s.transform(&matrix);
                write(&p, serde_json::to_string_pretty(&s).expect("standardizer serializes"))?;
            }
            if let Some(p) = map_output {
                write(&p, map.to_json())?;
            }
            log::info!("{} rows, {} columns", matrix.n_rows(), matrix.n_cols());
            write(&io.output, matrix.to_delimited())
        }
    }
}

fn train_config(kind: ModelKind, config: Option<&Path>, seed: Option<u64>) -> Result<TrainConfig> {
    let mut cfg = match config {
        Some(path) => {
            let mut table: toml::Table = read_toml(path)?;
            table.entry("kind").or_insert_with(|| kind.name().into());
            toml::Value::Table(table)
                .try_into::<TrainConfig>()
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => TrainConfig::new(ModelParams::default_for(kind), 0),
    };
    if cfg.kind() != kind {
        return Err(Error::Config(format!("--model {kind} but the configuration describes {}", cfg.kind())));
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.params.validate()?;
    Ok(cfg)
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFile {
    models: Vec<TrainConfig>,
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest {
            schema,
            input,
            format,
            output,
        } => {
            let schema = read_schema(&schema)?;
            let raw = match format {
                InputFormat::Fixed => parse_fixed_width(&fs::read(&input)?, &schema)?,
                InputFormat::Csv => read_delimited(&read_text(&input)?, &schema)?,
            };
            let text = write_delimited(&raw)?;
            match output {
                Some(p) => write(&p, text),
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
        Command::Synth {
            rows,
            seed,
            spec,
            signal_scale,
            output,
            schema_output,
            csv,
        } => {
            let spec: SynthSpec = match spec {
                Some(p) => read_toml(&p)?,
                None => SynthSpec::registry_default(rows, seed),
            };
            let spec = spec.with_signal_scale(signal_scale);
            let schema = synthetic_schema(&spec)?;
            let cohort = generate_synthetic(&spec)?;
            if let Some(p) = schema_output {
                write(&p, schema.to_text())?;
            }
            if csv {
                write(&output, write_delimited(&cohort.raw)?)
            } else {
                write(&output, write_fixed_width(&cohort.raw)?)
            }
        }
        Command::Prep(p) => prep(p),
        Command::Train {
            model,
            config,
            seed,
            matrix,
            imbalance,
            output,
        } => {
            let cfg = train_config(model, config.as_deref(), seed)?;
            let m = read_matrix(&matrix)?;
            let (rows, weights) = imbalance.plan(cfg.seed).prepare(&m)?;
            let trained = train(&rows, &weights, &cfg)?;
            if let Some(parent) = output.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            save_model(&trained, &output)
        }
        Command::Eval {
            model,
            matrix,
            threshold,
            metric,
            roc,
        } => {
            let trained = load_model(&model)?;
            let m = read_matrix(&matrix)?;
            let probs = trained.predict_proba(&m)?;
            let labels = m.require_labels()?;
            let metrics = evaluate(&probs, labels, threshold)?;
            println!("{} {:.6}", metric, metric.pick(&metrics));
            println!("{}", serde_json::to_string_pretty(&metrics).expect("metrics serialize"));
            if let Some(path) = roc {
                let mut text = String::from("fpr,tpr\n");
                for (f, t) in roc_points(&probs, labels)? {
                    text.push_str(&format!("{f},{t}\n"));
                }
                write(&path, text)?;
            }
            Ok(())
        }
        Command::Cv {
            grid,
            matrix,
            imbalance,
            k,
            seed,
            metric,
            threshold,
        } => {
            let grid: GridFile = read_toml(&grid)?;
            let m = read_matrix(&matrix)?;
            let opts = CvOptions {
                k,
                seed,
                metric,
                threshold,
            };
            let result = cross_validate(&m, &grid.models, &imbalance.plan(seed), &opts)?;
            print!("{}", result.to_delimited(&grid.models));
            println!(
                "selected grid point {} ({}), mean {} {:.6}",
                result.selected,
                result.selected_config.kind(),
                metric,
                result.means[result.selected]
            );
            Ok(())
        }
        Command::Rank { model, map, top, output } => {
            let trained = load_model(&model)?;
            let map = read_map(&map)?;
            let imp = importance(&trained, &map)?;
            let table = rank_table(&[(trained.kind().display_name().to_string(), imp)], top)?;
            print!("{}", table.to_text());
            if let Some(p) = output {
                write(&p, table.to_delimited())?;
            }
            Ok(())
        }
        Command::Run { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let dir = out
                .or_else(|| cfg.output_dir.clone())
                .ok_or_else(|| Error::Config("no output directory: pass --out or set output_dir".into()))?;
            let manifest = run_experiment(&cfg, &dir)?;
            print!("{}", fs::read_to_string(dir.join("auc.txt"))?);
            log::info!("{} jobs finished; reports in {}", manifest.results.len(), dir.display());
            Ok(())
        }
        Command::Compare { manifests, out } => {
            let loaded = manifests.iter().map(|p| RunManifest::load(p)).collect::<Result<Vec<_>>>()?;
            let cmp = compare_cohorts(&loaded)?;
            for (name, table) in [("auc", &cmp.auc), ("gmean", &cmp.gmean), ("rankings", &cmp.rankings)] {
                println!("{name}\n{}", table.to_text());
                if let Some(dir) = &out {
                    write(&dir.join(format!("compare_{name}.txt")), table.to_text())?;
                    write(&dir.join(format!("compare_{name}.csv")), table.to_csv())?;
                }
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = configure_threads().and_then(|()| execute(cli));
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 2 } else { 3 })
        }
    }
}
