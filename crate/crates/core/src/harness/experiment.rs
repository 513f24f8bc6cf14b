// SPDX-License-Identifier: Apache-2.0

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::folds::{stratified_folds, Fold};
use super::timing::TimingReport;
use crate::encoder::{check_level_config, EncoderConfig, EncoderModel, DEFAULT_DIM, DEFAULT_LEVELS};
use crate::error::{Error, Result};
use crate::hv::SeededStream;
use crate::model::{
    train, ClusterModel, RetrainMode, TrainConfig, DEFAULT_CLUSTERS, DEFAULT_ITERATIONS,
    DEFAULT_RETRAIN_EPOCHS,
};

pub const DEFAULT_FOLDS: usize = 10;

/// Every knob of an end-to-end run. One seed drives the dictionaries, the
/// cluster initialisation, the fold split and all perturbations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub dim: usize,
    pub levels: usize,
    pub clusters: usize,
    pub iterations: usize,
    pub retrain_epochs: usize,
    pub retrain_mode: RetrainMode,
    pub seed: u64,
    pub folds: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            dim: DEFAULT_DIM,
            levels: DEFAULT_LEVELS,
            clusters: DEFAULT_CLUSTERS,
            iterations: DEFAULT_ITERATIONS,
            retrain_epochs: DEFAULT_RETRAIN_EPOCHS,
            retrain_mode: RetrainMode::ClassLevel,
            seed: 0,
            folds: DEFAULT_FOLDS,
        }
    }
}

impl PipelineConfig {
    pub fn encoder_config(&self) -> EncoderConfig {
        EncoderConfig {
            dim: self.dim,
            levels: self.levels,
            seed: self.seed,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            clusters: self.clusters,
            iterations: self.iterations,
            retrain_epochs: self.retrain_epochs,
            seed: self.seed,
            retrain_mode: self.retrain_mode,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_level_config(self.dim, self.levels)?;
        self.train_config().validate()
    }

    fn stream(&self) -> SeededStream {
        SeededStream::new(self.seed).split("harness", 0)
    }
}

/// Fold accuracies with their mean and sample standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldSummary {
    pub fold_accuracies: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl FoldSummary {
    pub fn from_accuracies(fold_accuracies: Vec<f64>) -> Self {
        let n = fold_accuracies.len() as f64;
        let mean = fold_accuracies.iter().sum::<f64>() / n;
        let std = if fold_accuracies.len() > 1 {
            (fold_accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self {
            fold_accuracies,
            mean,
            std,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub value: f64,
    #[serde(flatten)]
    pub accuracy: FoldSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetSummary {
    pub rows: usize,
    pub features: usize,
    pub classes: Vec<(String, usize)>,
    pub majority_rate: f64,
}

impl DatasetSummary {
    fn of(data: &Dataset) -> Self {
        Self {
            rows: data.len(),
            features: data.features(),
            classes: data.class_counts(),
            majority_rate: data.majority_rate(),
        }
    }
}

/// Structured outcome of an evaluation, perturbation or sweep run.
///
/// Serializes with a fixed key order; apart from the optional timings the
/// output is a pure function of the data and the configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub config: PipelineConfig,
    pub dataset: DatasetSummary,
    pub baseline: FoldSummary,
    pub knob: Option<String>,
    pub curve: Vec<CurvePoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<TimingReport>,
    pub warnings: Vec<String>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Mean accuracy at a curve value.
    pub fn point(&self, value: f64) -> Option<&FoldSummary> {
        self.curve.iter().find(|p| p.value == value).map(|p| &p.accuracy)
    }
}

/// Which hyperparameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    Dim,
    Clusters,
    Retrain,
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::Dim => "dim",
            SweepAxis::Clusters => "clusters",
            SweepAxis::Retrain => "retrain",
        })
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dim" => Ok(SweepAxis::Dim),
            "clusters" => Ok(SweepAxis::Clusters),
            "retrain" => Ok(SweepAxis::Retrain),
            other => Err(Error::Config(format!("unknown sweep axis '{other}'"))),
        }
    }
}

/// Dataset with its class indices and fold split.
struct Prepared<'a> {
    data: &'a Dataset,
    table: Vec<String>,
    classes: Vec<usize>,
    folds: Vec<Fold>,
}

impl<'a> Prepared<'a> {
    fn new(data: &'a Dataset, config: &PipelineConfig) -> Result<Self> {
        config.validate()?;
        if data.is_empty() {
            return Err(Error::Ingestion("empty dataset".into()));
        }
        let (table, classes) = data.class_table();
        let folds = stratified_folds(&classes, table.len(), config.folds, &config.stream())?;
        Ok(Self {
            data,
            table,
            classes,
            folds,
        })
    }
}

/// Encoder and classifier trained on one fold.
pub(crate) struct TrainedFold {
    pub encoder: EncoderModel,
    pub model: ClusterModel,
    pub warnings: Vec<String>,
}

pub(crate) fn train_on(
    data: &Dataset,
    table: &[String],
    classes: &[usize],
    train_idx: &[usize],
    config: &PipelineConfig,
) -> Result<TrainedFold> {
    let rows: Vec<&[f64]> = train_idx.iter().map(|&i| data.rows[i].as_slice()).collect();
    let encoder = EncoderModel::fit(config.encoder_config(), &rows)?;
    let warnings = encoder
        .quantizer()
        .degenerate_features()
        .into_iter()
        .map(|n| {
            format!(
                "feature '{}' is constant on the training rows; mapped to level 1",
                data.feature_names[n]
            )
        })
        .collect();
    let samples = encoder.encode_batch(&rows)?;
    let labels: Vec<usize> = train_idx.iter().map(|&i| classes[i]).collect();
    let outcome = train(&samples, &labels, table.to_vec(), &config.train_config())?;
    Ok(TrainedFold {
        encoder,
        model: outcome.model,
        warnings,
    })
}

fn accuracy(
    encoder: &EncoderModel,
    model: &ClusterModel,
    rows: &[Vec<f64>],
    truth: &[usize],
) -> Result<f64> {
    let encoded = encoder.encode_batch(rows)?;
    let mut correct = 0usize;
    for (s, &j) in encoded.iter().zip(truth) {
        if model.classify(s)?.class == j {
            correct += 1;
        }
    }
    Ok(correct as f64 / truth.len() as f64)
}

fn collect_warnings(per_fold: impl IntoIterator<Item = (usize, Vec<String>)>) -> Vec<String> {
    per_fold
        .into_iter()
        .flat_map(|(f, ws)| ws.into_iter().map(move |w| format!("fold {f}: {w}")))
        .collect()
}

/// Per fold: train on the training split (with the given row selection),
/// then evaluate every knob value with `evaluate`.
fn run_folds<S, E>(
    prep: &Prepared<'_>,
    config: &PipelineConfig,
    knobs: &[f64],
    select_train: S,
    evaluate: E,
) -> Result<(Vec<Vec<f64>>, Vec<String>)>
where
    S: Fn(usize, &Fold) -> Result<Vec<usize>> + Sync,
    E: Fn(usize, &TrainedFold, &Fold, f64) -> Result<f64> + Sync,
{
    let per_fold: Vec<(Vec<f64>, Vec<String>)> = prep
        .folds
        .par_iter()
        .enumerate()
        .map(|(f, fold)| {
            let train_idx = select_train(f, fold)?;
            let trained = train_on(prep.data, &prep.table, &prep.classes, &train_idx, config)?;
            let accs = knobs
                .iter()
                .map(|&k| evaluate(f, &trained, fold, k))
                .collect::<Result<Vec<_>>>()?;
            Ok((accs, trained.warnings))
        })
        .collect::<Result<_>>()?;
    let warnings = collect_warnings(per_fold.iter().map(|(_, w)| w.clone()).enumerate());
    // transpose to knob-major
    let curves = (0..knobs.len())
        .map(|k| per_fold.iter().map(|(accs, _)| accs[k]).collect())
        .collect();
    Ok((curves, warnings))
}

fn plain_test(prep: &Prepared<'_>, trained: &TrainedFold, fold: &Fold) -> Result<f64> {
    let rows: Vec<Vec<f64>> = fold.test.iter().map(|&i| prep.data.rows[i].clone()).collect();
    let truth: Vec<usize> = fold.test.iter().map(|&i| prep.classes[i]).collect();
    accuracy(&trained.encoder, &trained.model, &rows, &truth)
}

fn report(
    experiment: &str,
    data: &Dataset,
    config: &PipelineConfig,
    baseline: Vec<f64>,
    knob: Option<&str>,
    curve: Vec<(f64, Vec<f64>)>,
    warnings: Vec<String>,
) -> ExperimentReport {
    ExperimentReport {
        experiment: experiment.to_string(),
        config: *config,
        dataset: DatasetSummary::of(data),
        baseline: FoldSummary::from_accuracies(baseline),
        knob: knob.map(str::to_string),
        curve: curve
            .into_iter()
            .map(|(value, accs)| CurvePoint {
                value,
                accuracy: FoldSummary::from_accuracies(accs),
            })
            .collect(),
        timings: None,
        warnings,
    }
}

/// Stratified k-fold accuracy. The quantizer is fit on each training split
/// only.
pub fn kfold_evaluate(data: &Dataset, config: &PipelineConfig) -> Result<ExperimentReport> {
    let prep = Prepared::new(data, config)?;
    let (mut curves, warnings) = run_folds(
        &prep,
        config,
        &[0.0],
        |_, fold| Ok(fold.train.clone()),
        |_, trained, fold, _| plain_test(&prep, trained, fold),
    )?;
    Ok(report("evaluate", data, config, curves.remove(0), None, vec![], warnings))
}

fn check_range(name: &str, values: &[f64], lo: f64, hi: f64, lo_open: bool) -> Result<()> {
    if values.is_empty() {
        return Err(Error::Config(format!("no {name} values given")));
    }
    for &v in values {
        let ok = v.is_finite() && v <= hi && if lo_open { v > lo } else { v >= lo };
        if !ok {
            let open = if lo_open { '(' } else { '[' };
            return Err(Error::Config(format!("{name} value {v} outside {open}{lo}, {hi}]")));
        }
    }
    Ok(())
}

/// Test inputs get independent uniform noise in `±delta * (upper - lower)`
/// per feature, using the fold's fitted thresholds. Training is untouched.
///
/// The same uniform draws are reused for every `delta`, so the curve
/// compares like with like.
pub fn noise_experiment(data: &Dataset, deltas: &[f64], config: &PipelineConfig) -> Result<ExperimentReport> {
    check_range("noise", deltas, 0.0, 1.0, false)?;
    let prep = Prepared::new(data, config)?;
    let root = config.stream();
    let mut knobs = vec![0.0];
    knobs.extend_from_slice(deltas);
    let (mut curves, warnings) = run_folds(
        &prep,
        config,
        &knobs,
        |_, fold| Ok(fold.train.clone()),
        |_, trained, fold, delta| {
            if delta == 0.0 {
                return plain_test(&prep, trained, fold);
            }
            let q = trained.encoder.quantizer();
            let rows: Vec<Vec<f64>> = fold
                .test
                .iter()
                .map(|&i| {
                    let mut s = root.split("noise", i as u64);
                    prep.data.rows[i]
                        .iter()
                        .enumerate()
                        .map(|(n, &x)| x + (2.0 * s.next_f64() - 1.0) * delta * q.span(n))
                        .collect()
                })
                .collect();
            let truth: Vec<usize> = fold.test.iter().map(|&i| prep.classes[i]).collect();
            accuracy(&trained.encoder, &trained.model, &rows, &truth)
        },
    )?;
    let baseline = curves.remove(0);
    let curve = deltas.iter().copied().zip(curves).collect();
    Ok(report("perturb-noise", data, config, baseline, Some("noise"), curve, warnings))
}

/// Stratified random subset of `fraction` of each class in `train`.
fn subsample(
    prep: &Prepared<'_>,
    train: &[usize],
    fraction: f64,
    stream: &SeededStream,
) -> Result<Vec<usize>> {
    if fraction == 1.0 {
        return Ok(train.to_vec());
    }
    let mut by_class = vec![Vec::new(); prep.table.len()];
    for &i in train {
        by_class[prep.classes[i]].push(i);
    }
    let mut out = Vec::new();
    for (j, rows) in by_class.iter().enumerate() {
        let keep = (fraction * rows.len() as f64).round() as usize;
        if keep == 0 {
            return Err(Error::Config(format!(
                "training fraction {fraction} leaves class '{}' with no rows",
                prep.table[j]
            )));
        }
        let picked = stream.split("class", j as u64).sample_indices(rows.len(), keep);
        out.extend(picked.into_iter().map(|p| rows[p]));
    }
    out.sort_unstable();
    Ok(out)
}

/// Train each fold on a stratified fraction of its training split; the
/// test split is untouched.
pub fn subsample_experiment(
    data: &Dataset,
    fractions: &[f64],
    config: &PipelineConfig,
) -> Result<ExperimentReport> {
    check_range("fraction", fractions, 0.0, 1.0, true)?;
    let prep = Prepared::new(data, config)?;
    let root = config.stream();
    let (mut base, mut warnings) = run_folds(
        &prep,
        config,
        &[0.0],
        |_, fold| Ok(fold.train.clone()),
        |_, trained, fold, _| plain_test(&prep, trained, fold),
    )?;
    let mut curve = Vec::new();
    for &fraction in fractions {
        let (mut accs, w) = run_folds(
            &prep,
            config,
            &[fraction],
            |f, fold| subsample(&prep, &fold.train, fraction, &root.split("subsample", f as u64)),
            |_, trained, fold, _| plain_test(&prep, trained, fold),
        )?;
        if fraction != 1.0 {
            warnings.extend(w.into_iter().map(|m| format!("fraction {fraction}: {m}")));
        }
        curve.push((fraction, accs.remove(0)));
    }
    Ok(report("perturb-subsample", data, config, base.remove(0), Some("fraction"), curve, warnings))
}

/// Flip `round(p * D)` bits of every stored prototype before testing.
pub fn bitflip_experiment(data: &Dataset, rates: &[f64], config: &PipelineConfig) -> Result<ExperimentReport> {
    check_range("bit-flip", rates, 0.0, 0.5, false)?;
    let prep = Prepared::new(data, config)?;
    let root = config.stream();
    let mut knobs = vec![0.0];
    knobs.extend_from_slice(rates);
    let (mut curves, warnings) = run_folds(
        &prep,
        config,
        &knobs,
        |_, fold| Ok(fold.train.clone()),
        |f, trained, fold, p| {
            if p == 0.0 {
                return plain_test(&prep, trained, fold);
            }
            let flipped = trained
                .model
                .with_flipped_prototypes(p, &root.split("bitflip", f as u64))?;
            let faulty = TrainedFold {
                encoder: trained.encoder.clone(),
                model: flipped,
                warnings: vec![],
            };
            plain_test(&prep, &faulty, fold)
        },
    )?;
    let baseline = curves.remove(0);
    let curve = rates.iter().copied().zip(curves).collect();
    Ok(report("perturb-bitflip", data, config, baseline, Some("flip-rate"), curve, warnings))
}

/// k-fold accuracy for each value of one hyperparameter, all else fixed.
pub fn hyperparam_sweep(
    data: &Dataset,
    axis: SweepAxis,
    values: &[usize],
    config: &PipelineConfig,
) -> Result<ExperimentReport> {
    if values.is_empty() {
        return Err(Error::Config("no sweep values given".into()));
    }
    let variants: Vec<PipelineConfig> = values
        .iter()
        .map(|&v| {
            let mut c = *config;
            match axis {
                SweepAxis::Dim => c.dim = v,
                SweepAxis::Clusters => c.clusters = v,
                SweepAxis::Retrain => c.retrain_epochs = v,
            }
            c.validate().map(|_| c)
        })
        .collect::<Result<_>>()?;
    let base = kfold_evaluate(data, config)?;
    let mut warnings = base.warnings.clone();
    let mut curve = Vec::new();
    for (v, c) in values.iter().zip(&variants) {
        let r = kfold_evaluate(data, c)?;
        warnings.extend(r.warnings.into_iter().map(|w| format!("{axis}={v}: {w}")));
        curve.push((*v as f64, r.baseline.fold_accuracies));
    }
    Ok(report(
        &format!("sweep-{axis}"),
        data,
        config,
        base.baseline.fold_accuracies,
        Some(&axis.to_string()),
        curve,
        warnings,
    ))
}
