// SPDX-License-Identifier: Apache-2.0

use serde::Serialize;

use crate::error::{Error, Result};

/// Lower and upper quantile used for the per-feature value range.
pub const LOWER_QUANTILE: f64 = 0.02;
pub const UPPER_QUANTILE: f64 = 0.98;

/// Per-feature value range used to map raw values onto `M` levels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureQuantizer {
    lower: Vec<f64>,
    upper: Vec<f64>,
    levels: usize,
}

/// Quantile `q` of already-sorted values, linear interpolation between order
/// statistics (position `(n - 1) * q`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

impl FeatureQuantizer {
    /// Fit the 2% / 98% thresholds of every column of a row-major matrix.
    pub fn fit<R: AsRef<[f64]>>(rows: &[R], levels: usize) -> Result<Self> {
        if levels < 2 {
            return Err(Error::Config(format!("level count {levels} must be at least 2")));
        }
        if rows.len() < 2 {
            return Err(Error::Config(format!(
                "need at least 2 samples to fit thresholds, got {}",
                rows.len()
            )));
        }
        let width = rows[0].as_ref().len();
        if width == 0 {
            return Err(Error::Config("no feature columns".into()));
        }
        let mut lower = Vec::with_capacity(width);
        let mut upper = Vec::with_capacity(width);
        let mut column = Vec::with_capacity(rows.len());
        for n in 0..width {
            column.clear();
            for (r, row) in rows.iter().enumerate() {
                let row = row.as_ref();
                if row.len() != width {
                    return Err(Error::Row {
                        row: r,
                        source: Box::new(Error::DimensionMismatch {
                            left: width,
                            right: row.len(),
                        }),
                    });
                }
                let x = row[n];
                if !x.is_finite() {
                    return Err(Error::Ingestion(format!(
                        "non-finite value {x} at row {r}, feature {n}"
                    )));
                }
                column.push(x);
            }
            column.sort_by(f64::total_cmp);
            lower.push(quantile_sorted(&column, LOWER_QUANTILE));
            upper.push(quantile_sorted(&column, UPPER_QUANTILE));
        }
        Ok(Self {
            lower,
            upper,
            levels,
        })
    }

    /// Build from explicit thresholds.
    pub fn from_thresholds(lower: Vec<f64>, upper: Vec<f64>, levels: usize) -> Result<Self> {
        if levels < 2 {
            return Err(Error::Config(format!("level count {levels} must be at least 2")));
        }
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::Config(format!(
                "threshold lists have lengths {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        for (n, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(Error::Config(format!(
                    "feature {n}: invalid thresholds [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self {
            lower,
            upper,
            levels,
        })
    }

    pub fn features(&self) -> usize {
        self.lower.len()
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Width `upper - lower` of feature `n`'s central range.
    pub fn span(&self, n: usize) -> f64 {
        self.upper[n] - self.lower[n]
    }

    /// Features whose thresholds coincide; they always map to level 1.
    pub fn degenerate_features(&self) -> Vec<usize> {
        (0..self.features())
            .filter(|&n| self.lower[n] == self.upper[n])
            .collect()
    }

    /// Level (1-based) of value `x` for feature `n`.
    pub fn level_index(&self, n: usize, x: f64) -> usize {
        let (lo, hi, m) = (self.lower[n], self.upper[n], self.levels);
        if lo == hi || x < lo {
            return 1;
        }
        if x >= hi {
            return m;
        }
        let level = ((x - lo) / (hi - lo) * m as f64 + 1.0).floor();
        (level as usize).clamp(1, m)
    }
}
