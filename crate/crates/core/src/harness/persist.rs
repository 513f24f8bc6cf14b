// SPDX-License-Identifier: Apache-2.0

//! Model files.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "HDCX"            magic
//! u32               format version
//! u64               body length in bytes
//! body:
//!   u16 + utf8      writing tool version (informational)
//!   u64 x 7         D, M, d, J, K, T, R
//!   u8              retrain mode (0 class-level, 1 cluster-level)
//!   u64             master seed
//!   J x (u32+utf8)  class labels
//!   d x (u32+utf8)  feature column names
//!   d x (f64, f64)  lower / upper thresholds
//!   J x:            u32 cluster count, then per cluster
//!                   u64 members, u64 additions, u64 subtractions, D x i32 sums
//!   [u8; 32]        SHA-256 of the regenerated prototypes
//! [u8; 32]          SHA-256 of the body
//! ```
//!
//! Dictionaries and prototypes are not stored. Loading regenerates them from
//! the seed and the accumulators and checks them against the stored digest.

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::encoder::{EncoderConfig, EncoderModel, FeatureQuantizer};
use crate::error::{Error, Result};
use crate::hv::{Accumulator, Hypervector};
use crate::model::{ClusterModel, Prediction, RetrainMode, TrainConfig};

pub const MAGIC: &[u8; 4] = b"HDCX";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;
const DIGEST_LEN: usize = 32;

/// Encoder plus classifier: everything needed to label raw feature rows.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub encoder: EncoderModel,
    pub model: ClusterModel,
    /// Training column names, in encoder order.
    pub feature_names: Vec<String>,
}

impl TrainedModel {
    /// Predicted label and the winning prototype for one raw feature row.
    pub fn predict(&self, row: &[f64]) -> Result<(&str, Prediction)> {
        let hv = self.encoder.encode(row)?;
        let p = self.model.classify(&hv)?;
        Ok((&self.model.labels()[p.class], p))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        encode(self, env!("CARGO_PKG_VERSION"))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        decode(bytes)
    }
}

pub fn save_model(model: &TrainedModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, model.to_bytes()?).map_err(|source| Error::ModelIo {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TrainedModel> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| Error::ModelIo {
        path: path.to_path_buf(),
        source,
    })?;
    TrainedModel::from_bytes(&bytes)
}

fn prototype_digest(model: &ClusterModel) -> [u8; DIGEST_LEN] {
    let mut h = Sha256::new();
    for c in model.clusters() {
        for w in c.prototype().words() {
            h.update(w.to_le_bytes());
        }
    }
    h.finalize().into()
}

pub(crate) fn encode(m: &TrainedModel, tool_version: &str) -> Result<Vec<u8>> {
    let enc = m.encoder.config();
    let cfg = m.model.config();
    let q = m.encoder.quantizer();
    if m.feature_names.len() != q.features() {
        return Err(Error::InvalidArgument(format!(
            "{} feature names for {} features",
            m.feature_names.len(),
            q.features()
        )));
    }
    let mut body = Vec::new();
    body.extend((tool_version.len() as u16).to_le_bytes());
    body.extend(tool_version.as_bytes());
    for v in [
        enc.dim,
        enc.levels,
        q.features(),
        m.model.num_classes(),
        cfg.clusters,
        cfg.iterations,
        cfg.retrain_epochs,
    ] {
        body.extend((v as u64).to_le_bytes());
    }
    body.push(match cfg.retrain_mode {
        RetrainMode::ClassLevel => 0,
        RetrainMode::ClusterLevel => 1,
    });
    body.extend(enc.seed.to_le_bytes());
    for name in m.model.labels().iter().chain(&m.feature_names) {
        body.extend((name.len() as u32).to_le_bytes());
        body.extend(name.as_bytes());
    }
    for (lo, hi) in q.lower().iter().zip(q.upper()) {
        body.extend(lo.to_le_bytes());
        body.extend(hi.to_le_bytes());
    }
    for j in 0..m.model.num_classes() {
        let clusters = m.model.class_clusters(j);
        body.extend((clusters.len() as u32).to_le_bytes());
        for c in clusters {
            let acc = c.accumulator();
            body.extend((c.members() as u64).to_le_bytes());
            body.extend(acc.additions().to_le_bytes());
            body.extend(acc.subtractions().to_le_bytes());
            for &count in acc.counts() {
                body.extend(count.to_le_bytes());
            }
        }
    }
    body.extend(prototype_digest(&m.model));

    let mut out = Vec::with_capacity(HEADER_LEN + body.len() + DIGEST_LEN);
    out.extend(MAGIC);
    out.extend(FORMAT_VERSION.to_le_bytes());
    out.extend((body.len() as u64).to_le_bytes());
    let digest: [u8; DIGEST_LEN] = Sha256::digest(&body).into();
    out.extend(body);
    out.extend(digest);
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or(Error::Truncated(what))?;
        let s = self.bytes.get(self.pos..end).ok_or(Error::Truncated(what))?;
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self, what: &'static str) -> Result<[u8; N]> {
        Ok(self.take(N, what)?.try_into().expect("length checked"))
    }

    fn u64(&mut self, what: &'static str) -> Result<u64> {
        self.array(what).map(u64::from_le_bytes)
    }

    fn usize(&mut self, what: &'static str) -> Result<usize> {
        usize::try_from(self.u64(what)?).map_err(|_| Error::Corrupt(format!("{what} too large")))
    }

    fn u32(&mut self, what: &'static str) -> Result<u32> {
        self.array(what).map(u32::from_le_bytes)
    }

    fn string(&mut self, len: usize, what: &'static str) -> Result<String> {
        String::from_utf8(self.take(len, what)?.to_vec())
            .map_err(|_| Error::Corrupt(format!("{what} is not UTF-8")))
    }
}

fn decode(bytes: &[u8]) -> Result<TrainedModel> {
    if bytes.len() < 4 {
        return Err(Error::Truncated("magic"));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::BadMagic);
    }
    let mut header = Cursor { bytes, pos: 4 };
    let version = header.u32("format version")?;
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let body_len = header.usize("body length")?;
    let expected_len = HEADER_LEN
        .checked_add(body_len)
        .and_then(|n| n.checked_add(DIGEST_LEN))
        .ok_or(Error::Truncated("body"))?;
    if bytes.len() < expected_len {
        return Err(Error::Truncated("body"));
    }
    if bytes.len() > expected_len {
        return Err(Error::Corrupt(format!(
            "{} trailing bytes",
            bytes.len() - expected_len
        )));
    }
    let body = &bytes[HEADER_LEN..HEADER_LEN + body_len];
    let digest: [u8; DIGEST_LEN] = Sha256::digest(body).into();
    if digest[..] != bytes[HEADER_LEN + body_len..] {
        return Err(Error::ChecksumMismatch { what: "file" });
    }

    let mut c = Cursor { bytes: body, pos: 0 };
    let tool_len = u16::from_le_bytes(c.array("tool version")?) as usize;
    let _tool_version = c.string(tool_len, "tool version")?;
    let dim = c.usize("dimension")?;
    let levels = c.usize("levels")?;
    let features = c.usize("features")?;
    let classes = c.usize("classes")?;
    let clusters = c.usize("clusters")?;
    let iterations = c.usize("iterations")?;
    let retrain_epochs = c.usize("retrain epochs")?;
    let retrain_mode = match c.take(1, "retrain mode")?[0] {
        0 => RetrainMode::ClassLevel,
        1 => RetrainMode::ClusterLevel,
        other => return Err(Error::Corrupt(format!("retrain mode {other}"))),
    };
    let seed = c.u64("seed")?;
    let mut labels = Vec::with_capacity(classes.min(1 << 16));
    for _ in 0..classes {
        let len = c.u32("label length")? as usize;
        labels.push(c.string(len, "label")?);
    }
    let mut feature_names = Vec::with_capacity(features.min(1 << 16));
    for _ in 0..features {
        let len = c.u32("feature name length")? as usize;
        feature_names.push(c.string(len, "feature name")?);
    }
    let mut lower = Vec::with_capacity(features.min(1 << 16));
    let mut upper = Vec::with_capacity(features.min(1 << 16));
    for _ in 0..features {
        lower.push(f64::from_le_bytes(c.array("thresholds")?));
        upper.push(f64::from_le_bytes(c.array("thresholds")?));
    }
    let mut stored = Vec::with_capacity(classes.min(1 << 16));
    for _ in 0..classes {
        let count = c.u32("cluster count")? as usize;
        let mut class = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let members = c.usize("member count")?;
            let additions = c.u64("additions")?;
            let subtractions = c.u64("subtractions")?;
            let raw = c.take(
                dim.checked_mul(4).ok_or(Error::Truncated("accumulator"))?,
                "accumulator",
            )?;
            let counts = raw
                .chunks_exact(4)
                .map(|b| i32::from_le_bytes(b.try_into().expect("4 bytes")))
                .collect();
            let acc = Accumulator::from_parts(counts, additions, subtractions)
                .map_err(|e| Error::Corrupt(e.to_string()))?;
            class.push((acc, members));
        }
        stored.push(class);
    }
    let stored_digest: [u8; DIGEST_LEN] = c.array("prototype checksum")?;
    if c.pos != body.len() {
        return Err(Error::Corrupt("unexpected bytes after prototype checksum".into()));
    }

    let quantizer = FeatureQuantizer::from_thresholds(lower, upper, levels)
        .map_err(|e| Error::Corrupt(e.to_string()))?;
    let encoder = EncoderModel::new(EncoderConfig { dim, levels, seed }, quantizer)
        .map_err(|e| Error::Corrupt(e.to_string()))?;
    let train_config = TrainConfig {
        clusters,
        iterations,
        retrain_epochs,
        seed,
        retrain_mode,
    };
    let model = ClusterModel::from_accumulators(dim, labels, train_config, stored)
        .map_err(|e| Error::Corrupt(e.to_string()))?;
    if prototype_digest(&model) != stored_digest {
        return Err(Error::ChecksumMismatch { what: "prototype" });
    }
    Ok(TrainedModel {
        encoder,
        model,
        feature_names,
    })
}

/// Prototypes of a loaded model, for callers that want to inspect them.
pub fn prototypes(model: &TrainedModel) -> Vec<&Hypervector> {
    model.model.clusters().map(|c| c.prototype()).collect()
}
