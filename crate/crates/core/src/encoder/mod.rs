// SPDX-License-Identifier: Apache-2.0

//! Maps numeric feature vectors onto sample hypervectors.
//!
//! Each feature value is quantized to one of `M` levels using the feature's
//! 2% and 98% training quantiles. The level hypervector is bound to the
//! feature's identity hypervector, and the `d` bound terms are bundled by
//! element-wise majority.

mod dictionary;
mod quantizer;

pub use dictionary::{check_level_config, IdDictionary, LevelSet};
pub use quantizer::{quantile_sorted, FeatureQuantizer, LOWER_QUANTILE, UPPER_QUANTILE};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hv::{fnv1a, Accumulator, Hypervector, OpCounts, SeededStream};

pub const DEFAULT_DIM: usize = 10_000;
pub const DEFAULT_LEVELS: usize = 101;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub dim: usize,
    pub levels: usize,
    pub seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            dim: DEFAULT_DIM,
            levels: DEFAULT_LEVELS,
            seed: 0,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        check_level_config(self.dim, self.levels)
    }
}

/// Identity and level dictionaries plus the fitted quantizer.
///
/// The dictionaries are a pure function of `(seed, D, M, d)` and are never
/// stored; [`EncoderModel::new`] regenerates them bit-exactly.
#[derive(Debug, Clone)]
pub struct EncoderModel {
    config: EncoderConfig,
    levels: LevelSet,
    ids: IdDictionary,
    quantizer: FeatureQuantizer,
    ties: SeededStream,
}

impl EncoderModel {
    pub fn new(config: EncoderConfig, quantizer: FeatureQuantizer) -> Result<Self> {
        config.validate()?;
        if quantizer.levels() != config.levels {
            return Err(Error::Config(format!(
                "quantizer has {} levels, encoder expects {}",
                quantizer.levels(),
                config.levels
            )));
        }
        let master = SeededStream::new(config.seed);
        let levels = LevelSet::build(&mut master.split("levels", 0), config.dim, config.levels)?;
        let ids = IdDictionary::build(&master, config.dim, quantizer.features())?;
        Ok(Self {
            config,
            levels,
            ids,
            quantizer,
            ties: master.split("encode-ties", 0),
        })
    }

    /// Fit the quantizer on `rows` and build the dictionaries.
    pub fn fit<R: AsRef<[f64]>>(config: EncoderConfig, rows: &[R]) -> Result<Self> {
        config.validate()?;
        let quantizer = FeatureQuantizer::fit(rows, config.levels)?;
        Self::new(config, quantizer)
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn features(&self) -> usize {
        self.ids.len()
    }

    pub fn quantizer(&self) -> &FeatureQuantizer {
        &self.quantizer
    }

    pub fn levels(&self) -> &LevelSet {
        &self.levels
    }

    pub fn ids(&self) -> &IdDictionary {
        &self.ids
    }

    /// Encoding of one feature vector.
    pub fn encode(&self, sample: &[f64]) -> Result<Hypervector> {
        self.encode_counted(sample, &mut OpCounts::default())
    }

    /// [`encode`](Self::encode), adding the XOR words used to `ops`.
    pub fn encode_counted(&self, sample: &[f64], ops: &mut OpCounts) -> Result<Hypervector> {
        if sample.len() != self.features() {
            return Err(Error::DimensionMismatch {
                left: self.features(),
                right: sample.len(),
            });
        }
        if let Some(n) = sample.iter().position(|x| !x.is_finite()) {
            return Err(Error::Ingestion(format!(
                "non-finite value {} in feature {n}",
                sample[n]
            )));
        }
        let mut acc = Accumulator::new(self.dim())?;
        for (n, &x) in sample.iter().enumerate() {
            let level = self.levels.level(self.quantizer.level_index(n, x));
            acc.add(&self.ids.id(n).bind_unchecked(level, ops))?;
        }
        Ok(acc.majority(&self.ties, sample_context(sample)))
    }

    /// Row-wise [`encode`](Self::encode), in input order.
    pub fn encode_batch<R: AsRef<[f64]> + Sync>(&self, rows: &[R]) -> Result<Vec<Hypervector>> {
        rows.par_iter()
            .enumerate()
            .map(|(i, row)| {
                self.encode(row.as_ref()).map_err(|e| Error::Row {
                    row: i,
                    source: Box::new(e),
                })
            })
            .collect()
    }
}

/// Tie-breaking context of a sample: FNV-1a over the little-endian bytes of
/// its values.
pub fn sample_context(sample: &[f64]) -> u64 {
    let bytes: Vec<u8> = sample.iter().flat_map(|x| x.to_le_bytes()).collect();
    fnv1a(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(dim: usize, levels: usize, features: usize) -> EncoderModel {
        let q = FeatureQuantizer::from_thresholds(vec![0.0; features], vec![1.0; features], levels)
            .unwrap();
        EncoderModel::new(
            EncoderConfig {
                dim,
                levels,
                seed: 3,
            },
            q,
        )
        .unwrap()
    }

    #[test]
    fn single_feature_is_the_bound_pair() {
        let enc = small(1000, 11, 1);
        let s = [0.37];
        let expected = enc
            .ids()
            .id(0)
            .bind(enc.levels().level(enc.quantizer().level_index(0, 0.37)))
            .unwrap();
        assert_eq!(enc.encode(&s).unwrap(), expected);
    }

    #[test]
    fn same_sample_same_encoding() {
        let enc = small(1000, 11, 6);
        let s = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
        let a = enc.encode(&s).unwrap();
        let again = small(1000, 11, 6).encode(&s).unwrap();
        assert_eq!(a, again);
    }

    #[test]
    fn encode_errors() {
        let enc = small(1000, 11, 3);
        assert!(matches!(
            enc.encode(&[0.1, 0.2]),
            Err(Error::DimensionMismatch { left: 3, right: 2 })
        ));
        assert!(matches!(
            enc.encode(&[0.1, f64::NAN, 0.2]),
            Err(Error::Ingestion(_))
        ));
    }

    #[test]
    fn batch_matches_sequential() {
        let enc = small(640, 11, 4);
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|i| (0..4).map(|n| ((i * 7 + n * 3) % 13) as f64 / 12.0).collect())
            .collect();
        let batch = enc.encode_batch(&rows).unwrap();
        assert_eq!(batch.len(), 50);
        for (row, hv) in rows.iter().zip(&batch) {
            assert_eq!(&enc.encode(row).unwrap(), hv);
        }
        let empty: Vec<Vec<f64>> = vec![];
        assert!(enc.encode_batch(&empty).unwrap().is_empty());
    }

    #[test]
    fn batch_error_names_row() {
        let enc = small(640, 11, 2);
        let rows = vec![vec![0.1, 0.2], vec![0.1, f64::INFINITY]];
        match enc.encode_batch(&rows) {
            Err(Error::Row { row, .. }) => assert_eq!(row, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn mismatched_levels_rejected() {
        let q = FeatureQuantizer::from_thresholds(vec![0.0], vec![1.0], 5).unwrap();
        assert!(EncoderModel::new(EncoderConfig::default(), q).is_err());
        let q = FeatureQuantizer::from_thresholds(vec![0.0], vec![1.0], 8).unwrap();
        let cfg = EncoderConfig {
            dim: 100,
            levels: 8,
            seed: 0,
        };
        assert!(matches!(EncoderModel::new(cfg, q), Err(Error::Config(_))));
    }

    #[test]
    fn op_count_per_encode() {
        let enc = small(1000, 11, 5);
        let mut ops = OpCounts::default();
        enc.encode_counted(&[0.0; 5], &mut ops).unwrap();
        assert_eq!(ops.xor_words, 5 * 16);
        assert_eq!(ops.popcount_words, 0);
    }
}
