// SPDX-License-Identifier: Apache-2.0

//! Evaluation harness: ingestion, stratified folds, perturbation and sweep
//! experiments, model files and timing.

mod dataset;
mod experiment;
mod folds;
mod persist;
mod timing;

pub use dataset::{load_csv, load_features, Dataset, DatasetSpec};
pub use experiment::{
    bitflip_experiment, hyperparam_sweep, kfold_evaluate, noise_experiment, subsample_experiment,
    CurvePoint, DatasetSummary, ExperimentReport, FoldSummary, PipelineConfig, SweepAxis,
    DEFAULT_FOLDS,
};
pub use folds::{stratified_folds, Fold};
pub use persist::{load_model, prototypes, save_model, TrainedModel, FORMAT_VERSION, MAGIC};
pub use timing::{
    expected_inference_ops, time_inferences, timing_report, TimingReport, DEFAULT_INFERENCE_BATCH,
};

/// Fit the encoder and train a classifier on every row of `data`.
pub fn fit_model(data: &Dataset, config: &PipelineConfig) -> crate::Result<TrainedModel> {
    config.validate()?;
    let (table, classes) = data.class_table();
    let all: Vec<usize> = (0..data.len()).collect();
    let trained = experiment::train_on(data, &table, &classes, &all, config)?;
    Ok(TrainedModel {
        encoder: trained.encoder,
        model: trained.model,
        feature_names: data.feature_names.clone(),
    })
}
