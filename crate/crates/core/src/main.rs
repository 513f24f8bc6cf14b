// SPDX-License-Identifier: Apache-2.0

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use hdcx::encoder::{DEFAULT_DIM, DEFAULT_LEVELS};
use hdcx::harness::{
    bitflip_experiment, fit_model, hyperparam_sweep, kfold_evaluate, load_csv, load_features,
    load_model, noise_experiment, save_model, subsample_experiment, timing_report, DatasetSpec,
    PipelineConfig, SweepAxis, DEFAULT_FOLDS, DEFAULT_INFERENCE_BATCH,
};
use hdcx::model::{RetrainMode, DEFAULT_CLUSTERS, DEFAULT_ITERATIONS, DEFAULT_RETRAIN_EPOCHS};
use hdcx::theory::run_theory_checks;

#[derive(Parser)]
#[command(name = "hdcx", version, about = "Clustered hyperdimensional classifier")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train on a whole file and write a model file to --out.
    Train(Common),
    /// Label rows with a saved model.
    Predict(PredictArgs),
    /// Stratified k-fold accuracy.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Also time a full-data fit and a batch of inferences.
        #[arg(long)]
        timings: bool,
        #[arg(long, default_value_t = DEFAULT_INFERENCE_BATCH)]
        inferences: usize,
    },
    /// Accuracy under input noise, training subsampling or prototype bit flips.
    Perturb {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        mode: PerturbMode,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Accuracy across values of one hyperparameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        axis: SweepAxis,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<usize>,
    },
    /// Monte Carlo checks of the statistical properties of the operations.
    CheckTheory {
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PerturbMode {
    Noise,
    Subsample,
    Bitflip,
}

#[derive(Clone, Copy, ValueEnum)]
enum RetrainModeArg {
    Class,
    Cluster,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "label")]
    label_col: String,
    /// Field delimiter (a single ASCII character).
    #[arg(long, default_value_t = ',')]
    delimiter: char,
    #[arg(long, default_value_t = DEFAULT_DIM)]
    dim: usize,
    #[arg(long, default_value_t = DEFAULT_LEVELS)]
    levels: usize,
    #[arg(long, default_value_t = DEFAULT_CLUSTERS)]
    clusters: usize,
    #[arg(long, default_value_t = DEFAULT_ITERATIONS)]
    iters: usize,
    #[arg(long, default_value_t = DEFAULT_RETRAIN_EPOCHS)]
    retrain: usize,
    #[arg(long, value_enum, default_value_t = RetrainModeArg::Class)]
    retrain_mode: RetrainModeArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_FOLDS)]
    folds: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// When this column exists, accuracy is reported on stderr.
    #[arg(long, default_value = "label")]
    label_col: String,
    #[arg(long, default_value_t = ',')]
    delimiter: char,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn delimiter_byte(c: char) -> anyhow::Result<u8> {
    if !c.is_ascii() {
        return Err(hdcx::Error::Config(format!("delimiter '{c}' is not ASCII")).into());
    }
    Ok(c as u8)
}

impl Common {
    fn config(&self) -> PipelineConfig {
        PipelineConfig {
            dim: self.dim,
            levels: self.levels,
            clusters: self.clusters,
            iterations: self.iters,
            retrain_epochs: self.retrain,
            retrain_mode: match self.retrain_mode {
                RetrainModeArg::Class => RetrainMode::ClassLevel,
                RetrainModeArg::Cluster => RetrainMode::ClusterLevel,
            },
            seed: self.seed,
            folds: self.folds,
        }
    }

    fn dataset(&self) -> anyhow::Result<hdcx::harness::Dataset> {
        let mut spec = DatasetSpec::new(&self.data, &self.label_col);
        spec.delimiter = delimiter_byte(self.delimiter)?;
        Ok(load_csv(&spec)?)
    }
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| hdcx::Error::Io {
                path: path.to_path_buf(),
                source: e,
            })
            .context("writing report")?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn with_newline(mut s: String) -> String {
    s.push('\n');
    s
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Train(common) => {
            let Some(out) = common.out.clone() else {
                return Err(hdcx::Error::Config("train needs --out for the model file".into()).into());
            };
            let config = common.config();
            config.validate()?;
            let data = common.dataset()?;
            let model = fit_model(&data, &config)?;
            save_model(&model, &out)?;
            eprintln!(
                "trained {} prototypes over {} classes from {} rows; wrote {}",
                model.model.num_prototypes(),
                model.model.num_classes(),
                data.len(),
                out.display()
            );
        }
        Command::Predict(args) => {
            let model = load_model(&args.model)?;
            let mut spec = DatasetSpec::new(&args.data, &args.label_col);
            spec.delimiter = delimiter_byte(args.delimiter)?;
            spec.feature_columns = Some(model.feature_names.clone());
            let (rows, labels) = load_features(&spec)?;
            let mut text = String::from("row,prediction,cluster,distance\n");
            let mut correct = 0usize;
            for (i, row) in rows.iter().enumerate() {
                let (label, p) = model
                    .predict(row)
                    .map_err(|e| hdcx::Error::Row { row: i + 1, source: Box::new(e) })?;
                if labels.as_ref().is_some_and(|l| l[i] == label) {
                    correct += 1;
                }
                text.push_str(&format!("{},{label},{},{}\n", i + 1, p.cluster, p.distance));
            }
            emit(args.out.as_deref(), &text)?;
            if labels.is_some() {
                eprintln!("accuracy {:.4} on {} rows", correct as f64 / rows.len() as f64, rows.len());
            }
        }
        Command::Evaluate {
            common,
            timings,
            inferences,
        } => {
            let config = common.config();
            config.validate()?;
            let data = common.dataset()?;
            let mut report = kfold_evaluate(&data, &config)?;
            if timings {
                report.timings = Some(timing_report(&data, &config, inferences)?);
            }
            emit(common.out.as_deref(), &with_newline(report.to_json()))?;
        }
        Command::Perturb {
            common,
            mode,
            values,
        } => {
            let config = common.config();
            config.validate()?;
            let data = common.dataset()?;
            let report = match mode {
                PerturbMode::Noise => noise_experiment(&data, &values, &config)?,
                PerturbMode::Subsample => subsample_experiment(&data, &values, &config)?,
                PerturbMode::Bitflip => bitflip_experiment(&data, &values, &config)?,
            };
            emit(common.out.as_deref(), &with_newline(report.to_json()))?;
        }
        Command::Sweep {
            common,
            axis,
            values,
        } => {
            let config = common.config();
            config.validate()?;
            let data = common.dataset()?;
            let report = hyperparam_sweep(&data, axis, &values, &config)?;
            emit(common.out.as_deref(), &with_newline(report.to_json()))?;
        }
        Command::CheckTheory { trials, seed, out } => {
            let report = run_theory_checks(trials, seed)?;
            emit(out.as_deref(), &with_newline(report.to_json()))?;
            if !report.pass {
                eprintln!("warning: one or more theory checks failed (see \"pass\" fields)");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = err
                .chain()
                .find_map(|e| e.downcast_ref::<hdcx::Error>())
                .map_or(3, hdcx::Error::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
