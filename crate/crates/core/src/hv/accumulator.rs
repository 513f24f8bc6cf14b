// SPDX-License-Identifier: Apache-2.0

use super::hypervector::{words_for, WORD_BITS};
use super::{Hypervector, SeededStream};
use crate::error::{check_dims, Error, Result};

/// Direction of an accumulate step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    #[inline]
    fn value(self) -> i32 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }
}

/// Un-thresholded bundling sums.
///
/// Keeping the integer sums around (instead of only the thresholded
/// prototype) is what makes retraining subtraction possible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Accumulator {
    dim: usize,
    counts: Vec<i32>,
    additions: u64,
    subtractions: u64,
}

// |counts[i]| never exceeds the number of operations applied, so bounding the
// operation count rules out i32 overflow without per-entry checks.
const MAX_OPERATIONS: u64 = i32::MAX as u64;

impl Accumulator {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension(dim));
        }
        Ok(Self {
            dim,
            counts: vec![0; dim],
            additions: 0,
            subtractions: 0,
        })
    }

    /// Restore from stored parts (model files).
    pub fn from_parts(
        counts: Vec<i32>,
        additions: u64,
        subtractions: u64,
    ) -> Result<Self> {
        let dim = counts.len();
        if dim == 0 {
            return Err(Error::InvalidDimension(0));
        }
        let ops = additions
            .checked_add(subtractions)
            .filter(|&n| n <= MAX_OPERATIONS)
            .ok_or(Error::AccumulatorOverflow {
                operations: additions.saturating_add(subtractions),
            })?;
        let net = additions as i64 - subtractions as i64;
        for (i, &c) in counts.iter().enumerate() {
            let c = i64::from(c);
            if c.unsigned_abs() > ops || (c - net) % 2 != 0 {
                return Err(Error::InvalidArgument(format!(
                    "count {c} at {i} inconsistent with {additions} additions and {subtractions} subtractions"
                )));
            }
        }
        Ok(Self {
            dim,
            counts,
            additions,
            subtractions,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn counts(&self) -> &[i32] {
        &self.counts
    }

    /// Net number of hypervectors added (additions minus subtractions).
    pub fn contributions(&self) -> i64 {
        self.additions as i64 - self.subtractions as i64
    }

    pub fn additions(&self) -> u64 {
        self.additions
    }

    pub fn subtractions(&self) -> u64 {
        self.subtractions
    }

    /// `counts[i] += sign * hv[i]` for every position.
    pub fn accumulate(&mut self, hv: &Hypervector, sign: Sign) -> Result<()> {
        check_dims(self.dim, hv.dim())?;
        let ops = self.additions + self.subtractions;
        if ops >= MAX_OPERATIONS {
            return Err(Error::AccumulatorOverflow { operations: ops });
        }
        let s = sign.value();
        for (chunk, &w) in self.counts.chunks_mut(WORD_BITS).zip(hv.words()) {
            for (b, c) in chunk.iter_mut().enumerate() {
                let neg = ((w >> b) & 1) as i32;
                *c = c.wrapping_add(s - 2 * s * neg);
            }
        }
        match sign {
            Sign::Plus => self.additions += 1,
            Sign::Minus => self.subtractions += 1,
        }
        Ok(())
    }

    pub fn add(&mut self, hv: &Hypervector) -> Result<()> {
        self.accumulate(hv, Sign::Plus)
    }

    pub fn subtract(&mut self, hv: &Hypervector) -> Result<()> {
        self.accumulate(hv, Sign::Minus)
    }

    /// Element-wise sign of the sums.
    ///
    /// Zero sums take a coin flip keyed by `(ties.key(), context, i)`, so the
    /// result is a pure function of the counts, the tie seed and the context.
    pub fn majority(&self, ties: &SeededStream, context: u64) -> Hypervector {
        let mut words = vec![0u64; words_for(self.dim)];
        for (wi, (chunk, word)) in self.counts.chunks(WORD_BITS).zip(&mut words).enumerate() {
            let mut w = 0u64;
            let mut has_tie = false;
            for (b, &c) in chunk.iter().enumerate() {
                w |= u64::from(c < 0) << b;
                has_tie |= c == 0;
            }
            if has_tie {
                for (b, &c) in chunk.iter().enumerate() {
                    if c == 0 && ties.keyed_bit(context, (wi * WORD_BITS + b) as u64) {
                        w |= 1 << b;
                    }
                }
            }
            *word = w;
        }
        Hypervector::from_words(self.dim, words).expect("majority builds well-formed words")
    }
}
