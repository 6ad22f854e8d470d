// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("sequence needs at least 2 observations, got {0}")]
    TooFewRows(usize),
    #[error("ragged input: row {row} has {found} columns, expected {expected}")]
    RaggedRows { row: usize, expected: usize, found: usize },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("leave-out averaging needs at least 3 observations, got {0}")]
    TooFewPoints(usize),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("unsupported block size {0}; only pairs are supported")]
    UnsupportedBlockSize(usize),
    #[error("invalid block partition: {0}")]
    InvalidPartition(String),
    #[error("invalid dissimilarity matrix: {0}")]
    InvalidMatrix(String),
    #[error("cluster is empty")]
    EmptyCluster,
    #[error("clustering needs at least 2 observations, got {0}")]
    DegenerateInput(usize),
    #[error("index {index} out of range {lo}..={hi}")]
    IndexOutOfRange { index: usize, lo: usize, hi: usize },
    #[error("labeling is constant; no split candidates")]
    ConstantLabeling,
    #[error("exact enumeration of {arrangements} arrangements exceeds the cap of {cap}")]
    TooLarge { arrangements: u128, cap: u64 },
    #[error("sequence of length {len} is too short for minimum gap {min_gap}")]
    TooShort { len: usize, min_gap: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid covariance: {0}")]
    BadCovariance(String),
    #[error("invalid range: {0}")]
    BadRange(String),
    #[error("invalid parameter: {0}")]
    BadParameter(String),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("cutoff cache I/O at {path}: {source}")]
    CacheIo {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
