// SPDX-License-Identifier: Apache-2.0

//! Hyperdimensional computing classifier with class-wise hyperspace
//! clustering and retraining.
//!
//! Numeric feature vectors are quantized into levels, encoded as bipolar
//! hypervectors by binding per-feature identity vectors with level vectors
//! and bundling the results, then grouped into several prototypes per class.
//! Inference is a nearest-prototype search under Hamming distance.

pub mod encoder;
pub mod error;
pub mod harness;
pub mod hv;
pub mod model;
pub mod theory;

pub use error::{Error, ErrorKind, Result};
