// SPDX-License-Identifier: Apache-2.0

//! Bit-packed bipolar hypervectors and the elementary operations on them.

mod accumulator;
mod hypervector;
mod stream;

pub use accumulator::{Accumulator, Sign};
pub use hypervector::{words_for, Hypervector, OpCounts};
pub use stream::{fnv1a, splitmix64, SeededStream};

use crate::error::Result;

/// Random hypervector drawn from `stream`.
pub fn random_hv(stream: &mut SeededStream, dim: usize) -> Result<Hypervector> {
    Hypervector::random(dim, stream)
}

pub fn bind(a: &Hypervector, b: &Hypervector) -> Result<Hypervector> {
    a.bind(b)
}

pub fn hamming(a: &Hypervector, b: &Hypervector) -> Result<f64> {
    a.hamming(b)
}

/// Bundle a set of hypervectors: accumulate then threshold by majority.
pub fn bundle<'a, I>(items: I, ties: &SeededStream, context: u64) -> Result<Hypervector>
where
    I: IntoIterator<Item = &'a Hypervector>,
{
    let mut iter = items.into_iter().peekable();
    let first = iter
        .peek()
        .ok_or_else(|| crate::Error::InvalidArgument("bundle of nothing".into()))?;
    let mut acc = Accumulator::new(first.dim())?;
    for hv in iter {
        acc.add(hv)?;
    }
    Ok(acc.majority(ties, context))
}
