// SPDX-License-Identifier: Apache-2.0

use std::fmt;

use super::SeededStream;
use crate::error::{check_dims, Error, Result};

pub(crate) const WORD_BITS: usize = 64;

/// Number of 64-bit words needed for `dim` packed entries.
#[inline]
pub fn words_for(dim: usize) -> usize {
    dim.div_ceil(WORD_BITS)
}

#[inline]
fn tail_mask(dim: usize) -> u64 {
    match dim % WORD_BITS {
        0 => u64::MAX,
        r => (1u64 << r) - 1,
    }
}

/// Tally of word-level kernel operations, used as an energy proxy.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct OpCounts {
    pub xor_words: u64,
    pub popcount_words: u64,
}

impl std::ops::AddAssign for OpCounts {
    fn add_assign(&mut self, rhs: Self) {
        self.xor_words += rhs.xor_words;
        self.popcount_words += rhs.popcount_words;
    }
}

/// A bipolar hypervector in `{-1, +1}^D`, bit-packed.
///
/// Stored bit 1 means -1 and stored bit 0 means +1, so binding is XOR and the
/// Hamming distance is the population count of the XOR. Padding bits in the
/// last word are always zero.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Hypervector {
    dim: usize,
    words: Vec<u64>,
}

impl Hypervector {
    /// The all-(+1) vector, the identity for binding.
    pub fn identity(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension(dim));
        }
        Ok(Self {
            dim,
            words: vec![0; words_for(dim)],
        })
    }

    /// Each entry independently +1 or -1 with probability one half.
    pub fn random(dim: usize, stream: &mut SeededStream) -> Result<Self> {
        let mut hv = Self::identity(dim)?;
        for w in &mut hv.words {
            *w = stream.next_u64();
        }
        hv.clear_padding();
        Ok(hv)
    }

    pub fn from_bipolar(values: &[i8]) -> Result<Self> {
        let mut hv = Self::identity(values.len())?;
        for (i, &v) in values.iter().enumerate() {
            match v {
                1 => {}
                -1 => hv.words[i / WORD_BITS] |= 1 << (i % WORD_BITS),
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "entry {i} is {other}, expected -1 or +1"
                    )))
                }
            }
        }
        Ok(hv)
    }

    /// Rebuild from packed words. Padding bits must be zero.
    pub fn from_words(dim: usize, words: Vec<u64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension(dim));
        }
        check_dims(words_for(dim), words.len())?;
        if words[words.len() - 1] & !tail_mask(dim) != 0 {
            return Err(Error::InvalidArgument("non-zero padding bits".into()));
        }
        Ok(Self { dim, words })
    }

    pub fn to_bipolar(&self) -> Vec<i8> {
        (0..self.dim).map(|i| self.get(i)).collect()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// Entry `i` as -1 or +1.
    #[inline]
    pub fn get(&self, i: usize) -> i8 {
        assert!(i < self.dim, "index {i} out of range for dim {}", self.dim);
        if self.bit(i) {
            -1
        } else {
            1
        }
    }

    #[inline]
    pub(crate) fn bit(&self, i: usize) -> bool {
        (self.words[i / WORD_BITS] >> (i % WORD_BITS)) & 1 == 1
    }

    /// Negate entry `i`.
    #[inline]
    pub fn flip(&mut self, i: usize) {
        assert!(i < self.dim, "index {i} out of range for dim {}", self.dim);
        self.words[i / WORD_BITS] ^= 1 << (i % WORD_BITS);
    }

    /// Number of -1 entries.
    pub fn neg_count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Number of +1 entries.
    pub fn pos_count(&self) -> usize {
        self.dim - self.neg_count()
    }

    pub fn negate(&self) -> Self {
        let mut out = self.clone();
        for w in &mut out.words {
            *w = !*w;
        }
        out.clear_padding();
        out
    }

    /// Element-wise product.
    pub fn bind(&self, other: &Self) -> Result<Self> {
        check_dims(self.dim, other.dim)?;
        Ok(self.bind_unchecked(other, &mut OpCounts::default()))
    }

    pub(crate) fn bind_unchecked(&self, other: &Self, ops: &mut OpCounts) -> Self {
        ops.xor_words += self.words.len() as u64;
        Self {
            dim: self.dim,
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a ^ b)
                .collect(),
        }
    }

    /// Normalized Hamming distance in `[0, 1]`.
    pub fn hamming(&self, other: &Self) -> Result<f64> {
        Ok(self.hamming_count(other)? as f64 / self.dim as f64)
    }

    /// Number of differing positions.
    pub fn hamming_count(&self, other: &Self) -> Result<usize> {
        check_dims(self.dim, other.dim)?;
        Ok(self.distance_unchecked(other, &mut OpCounts::default()))
    }

    #[inline]
    pub(crate) fn distance_unchecked(&self, other: &Self, ops: &mut OpCounts) -> usize {
        let n = self.words.len() as u64;
        ops.xor_words += n;
        ops.popcount_words += n;
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum()
    }

    /// Negate exactly `round(p * D)` distinct positions chosen uniformly
    /// without replacement.
    pub fn flip_bits(&self, p: f64, stream: &mut SeededStream) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!(
                "flip rate {p} outside [0, 1]"
            )));
        }
        let count = (p * self.dim as f64).round() as usize;
        Ok(self.flip_count(count.min(self.dim), stream))
    }

    /// Negate `count` distinct uniformly chosen positions.
    pub fn flip_count(&self, count: usize, stream: &mut SeededStream) -> Self {
        if count == self.dim {
            return self.negate();
        }
        let mut out = self.clone();
        for i in stream.sample_indices(self.dim, count) {
            out.flip(i);
        }
        out
    }

    fn clear_padding(&mut self) {
        let mask = tail_mask(self.dim);
        if let Some(last) = self.words.last_mut() {
            *last &= mask;
        }
    }
}

impl fmt::Debug for Hypervector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Hypervector(dim={}, neg={})", self.dim, self.neg_count())
    }
}
