// SPDX-License-Identifier: Apache-2.0

use std::time::Instant;

use serde::Serialize;

use super::dataset::Dataset;
use super::experiment::{train_on, PipelineConfig};
use crate::encoder::EncoderModel;
use crate::error::{Error, Result};
use crate::hv::{words_for, OpCounts};
use crate::model::ClusterModel;

pub const DEFAULT_INFERENCE_BATCH: usize = 1000;

/// Wall-clock timings plus word-operation counts as an energy proxy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingReport {
    pub train_seconds: f64,
    pub inferences: usize,
    pub inference_seconds: f64,
    pub dim: usize,
    pub features: usize,
    pub prototypes: usize,
    pub words_per_vector: usize,
    pub ops: OpCounts,
    pub expected_ops: OpCounts,
}

/// Word operations for `inferences` encode + classify calls: each encode
/// binds `d` pairs (one XOR per word) and each classify compares against
/// every prototype (one XOR and one popcount per word).
pub fn expected_inference_ops(
    inferences: usize,
    dim: usize,
    features: usize,
    prototypes: usize,
) -> OpCounts {
    let w = words_for(dim) as u64;
    let n = inferences as u64;
    OpCounts {
        xor_words: n * (features + prototypes) as u64 * w,
        popcount_words: n * prototypes as u64 * w,
    }
}

/// Run `inferences` single-threaded encode + classify calls, cycling through
/// `rows`. Returns elapsed seconds and the counted operations.
pub fn time_inferences(
    encoder: &EncoderModel,
    model: &ClusterModel,
    rows: &[Vec<f64>],
    inferences: usize,
) -> Result<(f64, OpCounts)> {
    if rows.is_empty() {
        return Err(Error::Ingestion("no rows to time".into()));
    }
    let mut ops = OpCounts::default();
    let start = Instant::now();
    for i in 0..inferences {
        let s = encoder.encode_counted(&rows[i % rows.len()], &mut ops)?;
        std::hint::black_box(model.classify_counted(&s, &mut ops)?);
    }
    Ok((start.elapsed().as_secs_f64(), ops))
}

/// Train on every row (timed), then time a batch of inferences.
pub fn timing_report(data: &Dataset, config: &PipelineConfig, inferences: usize) -> Result<TimingReport> {
    config.validate()?;
    let (table, classes) = data.class_table();
    let all: Vec<usize> = (0..data.len()).collect();
    let start = Instant::now();
    let trained = train_on(data, &table, &classes, &all, config)?;
    let train_seconds = start.elapsed().as_secs_f64();
    let (inference_seconds, ops) =
        time_inferences(&trained.encoder, &trained.model, &data.rows, inferences)?;
    let prototypes = trained.model.num_prototypes();
    Ok(TimingReport {
        train_seconds,
        inferences,
        inference_seconds,
        dim: config.dim,
        features: data.features(),
        prototypes,
        words_per_vector: words_for(config.dim),
        ops,
        expected_ops: expected_inference_ops(inferences, config.dim, data.features(), prototypes),
    })
}
