// SPDX-License-Identifier: Apache-2.0

use crate::error::{Error, Result};
use crate::hv::{Hypervector, SeededStream};

/// `M` chained level hypervectors.
///
/// Starting from a random base, level `i + 1` is level `i` with `D / (M - 1)`
/// fresh positions negated; no position is flipped twice, so the distance
/// between levels `i` and `j` is exactly `|i - j| / (M - 1)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelSet {
    levels: Vec<Hypervector>,
}

impl LevelSet {
    pub fn build(stream: &mut SeededStream, dim: usize, levels: usize) -> Result<Self> {
        check_level_config(dim, levels)?;
        let step = dim / (levels - 1);
        let base = Hypervector::random(dim, stream)?;
        // a uniform permutation of positions, consumed `step` at a time,
        // picks each level's flips from the not-yet-flipped positions
        let order = stream.sample_indices(dim, dim);
        let mut out = Vec::with_capacity(levels);
        out.push(base);
        for chunk in order.chunks(step) {
            let mut next = out[out.len() - 1].clone();
            for &i in chunk {
                next.flip(i);
            }
            out.push(next);
        }
        debug_assert_eq!(out.len(), levels);
        Ok(Self { levels: out })
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Level `m`, 1-based.
    pub fn level(&self, m: usize) -> &Hypervector {
        &self.levels[m - 1]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Hypervector> {
        self.levels.iter()
    }
}

/// Rejects level counts that do not evenly divide the dimension.
pub fn check_level_config(dim: usize, levels: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::InvalidDimension(dim));
    }
    if levels < 2 {
        return Err(Error::Config(format!("level count M = {levels} must be at least 2")));
    }
    if !dim.is_multiple_of(levels - 1) {
        return Err(Error::Config(format!(
            "M - 1 = {} must divide the dimension D = {dim} (levels M = {levels})",
            levels - 1
        )));
    }
    Ok(())
}

/// One random identity hypervector per feature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdDictionary {
    ids: Vec<Hypervector>,
}

impl IdDictionary {
    /// Feature `n` gets its own sub-stream `(ids, n)` of `stream`.
    pub fn build(stream: &SeededStream, dim: usize, features: usize) -> Result<Self> {
        if features == 0 {
            return Err(Error::Config("feature count must be at least 1".into()));
        }
        let ids = (0..features)
            .map(|n| Hypervector::random(dim, &mut stream.split("ids", n as u64)))
            .collect::<Result<_>>()?;
        Ok(Self { ids })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Feature `n`, 0-based.
    pub fn id(&self, n: usize) -> &Hypervector {
        &self.ids[n]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Hypervector> {
        self.ids.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_levels_are_complements() {
        let set = LevelSet::build(&mut SeededStream::new(1), 100, 2).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.level(2), &set.level(1).negate());
        assert_eq!(set.level(1).hamming(set.level(2)).unwrap(), 1.0);
    }

    #[test]
    fn level_distances_exact() {
        let set = LevelSet::build(&mut SeededStream::new(5), 1000, 11).unwrap();
        for i in 1..=11 {
            for j in 1..=11 {
                let d = set.level(i).hamming_count(set.level(j)).unwrap();
                assert_eq!(d, i.abs_diff(j) * 100);
            }
        }
    }

    #[test]
    fn divisibility_enforced() {
        let err = LevelSet::build(&mut SeededStream::new(1), 100, 8).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("100") && msg.contains('7') && msg.contains('8'), "{msg}");
        assert!(LevelSet::build(&mut SeededStream::new(1), 100, 1).is_err());
    }

    #[test]
    fn ids_regenerate() {
        let s = SeededStream::new(77);
        let a = IdDictionary::build(&s, 256, 4).unwrap();
        let b = IdDictionary::build(&s, 256, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.id(0), a.id(1));
        assert!(IdDictionary::build(&s, 256, 0).is_err());
    }
}
