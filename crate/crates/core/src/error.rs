// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

/// Errors raised anywhere in the pipeline.
///
/// Variants fall into three families that the command-line tool maps onto
/// distinct exit codes: configuration, data, and model-file problems.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid dimension: {0} (must be at least 1)")]
    InvalidDimension(usize),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("accumulator overflow after {operations} operations")]
    AccumulatorOverflow { operations: u64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("training data error: {0}")]
    TrainingData(String),

    #[error("ingestion error at row {row}, column '{column}': {message}")]
    Cell {
        row: usize,
        column: String,
        message: String,
    },

    #[error("ingestion error: {0}")]
    Ingestion(String),

    #[error("row {row}: {source}")]
    Row {
        row: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("model file: bad magic tag")]
    BadMagic,

    #[error("model file: unsupported format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("model file: {what} checksum mismatch")]
    ChecksumMismatch { what: &'static str },

    #[error("model file: truncated while reading {0}")]
    Truncated(&'static str),

    #[error("model file: {0}")]
    Corrupt(String),

    #[error("model file {path}: {source}")]
    ModelIo {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad error family, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    ModelFile,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidDimension(_)
            | Error::DimensionMismatch { .. }
            | Error::InvalidArgument(_)
            | Error::AccumulatorOverflow { .. }
            | Error::Config(_) => ErrorKind::Config,
            Error::TrainingData(_)
            | Error::Cell { .. }
            | Error::Ingestion(_)
            | Error::Io { .. } => ErrorKind::Data,
            Error::Row { source, .. } => source.kind(),
            Error::BadMagic
            | Error::VersionMismatch { .. }
            | Error::ChecksumMismatch { .. }
            | Error::Truncated(_)
            | Error::Corrupt(_)
            | Error::ModelIo { .. } => ErrorKind::ModelFile,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::ModelFile => 4,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn check_dims(left: usize, right: usize) -> Result<()> {
    if left == right {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { left, right })
    }
}
