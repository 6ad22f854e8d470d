// SPDX-License-Identifier: MIT OR Apache-2.0

//! Removal of isolated points before change-point testing.
//!
//! After clustering, a point whose two neighbours in time share a label that
//! differs from its own is treated as an anomaly. All such points are dropped
//! at once, the rest is re-clustered, and this repeats until nothing is
//! flagged.

use serde::{Deserialize, Serialize};

use crate::pipeline::{cluster_sequence, DetectorConfig};
use crate::rng::{derive_seed, stream};
use crate::{DataSequence, DissimilaritySpec, Error, Result};

/// Sequences shorter than this are not filtered further.
pub const MIN_FILTER_LEN: usize = 5;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterResult {
    /// Surviving original indices (0-based, increasing).
    pub kept: Vec<usize>,
    /// Original indices (0-based) removed in each round.
    pub removed_per_round: Vec<Vec<usize>>,
    pub rounds: usize,
}

/// Interior positions `i` with `labels[i−1] = labels[i+1] ≠ labels[i]`.
pub fn flag_isolated(labels: &[u8]) -> Vec<usize> {
    (1..labels.len().saturating_sub(1))
        .filter(|&i| labels[i - 1] == labels[i + 1] && labels[i] != labels[i - 1])
        .collect()
}

pub fn filter_isolated(
    data: &DataSequence,
    spec: &DissimilaritySpec,
    config: &DetectorConfig,
    max_rounds: usize,
) -> Result<FilterResult> {
    if data.n() < MIN_FILTER_LEN {
        return Err(Error::TooShort {
            len: data.n(),
            min_gap: MIN_FILTER_LEN,
        });
    }
    let base = derive_seed(config.seed, stream::FILTER);
    let mut kept: Vec<usize> = (0..data.n()).collect();
    let mut removed_per_round = Vec::new();
    let mut rounds = 0;
    while rounds < max_rounds && kept.len() >= MIN_FILTER_LEN {
        let current = data.select(&kept)?;
        let labels = cluster_sequence(&current, spec, config, derive_seed(base, rounds as u64))?;
        rounds += 1;
        let flagged = flag_isolated(labels.labels());
        if flagged.is_empty() {
            break;
        }
        let removed: Vec<usize> = flagged.iter().map(|&i| kept[i]).collect();
        let mut drop = vec![false; kept.len()];
        for &i in &flagged {
            drop[i] = true;
        }
        kept = kept.into_iter().zip(drop).filter(|(_, d)| !d).map(|(k, _)| k).collect();
        removed_per_round.push(removed);
    }
    Ok(FilterResult {
        kept,
        removed_per_round,
        rounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flag_examples() {
        assert_eq!(flag_isolated(&[0, 0, 1, 0, 0]), vec![2]);
        assert_eq!(flag_isolated(&[0, 1, 0, 1, 0]), vec![1, 2, 3]);
        assert!(flag_isolated(&[0, 0, 0, 1, 1, 1]).is_empty());
        assert!(flag_isolated(&[0, 0, 1, 1, 0, 0]).is_empty());
        assert!(flag_isolated(&[1]).is_empty());
    }

    fn seq(values: &[f64]) -> DataSequence {
        let rows: Vec<Vec<f64>> = values.iter().map(|&v| vec![v, v]).collect();
        DataSequence::from_rows(&rows).unwrap()
    }

    #[test]
    fn clean_sequence_is_identity() {
        let data = seq(&[0.0, 0.1, 0.2, 0.1, 10.0, 10.1, 10.2, 10.0]);
        let cfg = DetectorConfig::default();
        let r = filter_isolated(&data, &DissimilaritySpec::euclidean(), &cfg, 5).unwrap();
        assert_eq!(r.kept, (0..8).collect::<Vec<_>>());
        assert_eq!(r.rounds, 1);
        assert!(r.removed_per_round.is_empty());
    }

    #[test]
    fn isolated_point_removed_and_partition_holds() {
        let data = seq(&[0.0, 0.1, 0.2, 9.0, 0.1, 0.0, 0.2, 0.1]);
        let cfg = DetectorConfig::default();
        let r = filter_isolated(&data, &DissimilaritySpec::euclidean(), &cfg, 5).unwrap();
        assert_eq!(r.removed_per_round[0], vec![3]);
        let mut all: Vec<usize> = r.kept.clone();
        all.extend(r.removed_per_round.iter().flatten());
        all.sort_unstable();
        assert_eq!(all, (0..8).collect::<Vec<_>>());
        assert!(r.kept.contains(&0) && r.kept.contains(&7));
        assert!(r.rounds <= 5);
    }

    #[test]
    fn too_short() {
        let data = seq(&[0.0, 1.0, 2.0, 3.0]);
        let cfg = DetectorConfig::default();
        assert!(matches!(
            filter_isolated(&data, &DissimilaritySpec::euclidean(), &cfg, 5),
            Err(Error::TooShort { .. })
        ));
    }
}
