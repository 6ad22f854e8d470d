// SPDX-License-Identifier: MIT OR Apache-2.0

//! Clustering-based change-point detection for high-dimension, low-sample-size
//! sequences.
//!
//! The pipeline for a single change-point is:
//!
//! 1. build a data-driven [`DissimilarityMatrix`] ([`dissim`]),
//! 2. split the observations into two clusters with dissimilarity-driven
//!    2-means ([`cluster`]),
//! 3. scan the 0/1 label sequence for the split that best agrees with the
//!    clustering, using a Rand index or an impurity ([`singlecp`]),
//! 4. calibrate the minimum against its permutation law given the cluster
//!    sizes, which is free of the data distribution ([`nulldist`]).
//!
//! [`multicp`] extends this to several change-points by recursive
//! segmentation on windowed p-values, [`robust`] removes isolated outliers
//! before testing, and [`datagen`] reproduces the simulated scenarios used to
//! validate the methods.

#![forbid(unsafe_code)]

pub mod cluster;
pub mod datagen;
pub mod dissim;
mod error;
pub mod experiment;
pub mod multicp;
pub mod nulldist;
pub mod pipeline;
pub mod rng;
pub mod robust;
pub mod singlecp;
mod types;

pub use error::{Error, Result};
pub use types::{
    validate_sequence, ChangePointReport, DataSequence, DissimilarityMatrix, Labeling, NodeRecord, ReportMetadata,
    REPORT_SCHEMA,
};

pub use cluster::{two_means, ClusterConfig, ClusterResult};
pub use dissim::{BlockPartition, DissimilaritySpec, Preset, TransformPair};
pub use nulldist::{CutoffCache, NullDistribution, NullPolicy, RandomizedThreshold, Statistic};
pub use pipeline::{DetectorConfig, SplitStatistic};
pub use singlecp::ImpurityKind;
