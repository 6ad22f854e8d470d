// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use super::{pairwise_distance_correlation, EXACT_MATCHING_MAX_DIM};
use crate::{DataSequence, Error, Result};

/// Disjoint groups of 0-based coordinate indices covering `0..d`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockPartition {
    blocks: Vec<Vec<usize>>,
    d: usize,
}

impl BlockPartition {
    pub fn new(blocks: Vec<Vec<usize>>, d: usize) -> Result<Self> {
        let p = Self { blocks, d };
        p.validate()?;
        Ok(p)
    }

    /// Consecutive blocks of `size` coordinates; the last may be shorter.
    pub fn consecutive(d: usize, size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidPartition("block size 0".into()));
        }
        let blocks = (0..d).step_by(size).map(|s| (s..(s + size).min(d)).collect()).collect();
        Self::new(blocks, d)
    }

    pub(super) fn validate(&self) -> Result<()> {
        let mut seen = vec![false; self.d];
        for b in &self.blocks {
            if b.is_empty() {
                return Err(Error::InvalidPartition("empty block".into()));
            }
            for &q in b {
                if q >= self.d || seen[q] {
                    return Err(Error::InvalidPartition(format!(
                        "coordinate {q} out of range or repeated"
                    )));
                }
                seen[q] = true;
            }
        }
        if let Some(q) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidPartition(format!("coordinate {q} not covered")));
        }
        Ok(())
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    /// Number of blocks.
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }
}

/// How a coordinate pairing was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    Exact,
    Greedy,
}

impl Pairing {
    pub fn name(self) -> &'static str {
        match self {
            Pairing::Exact => "exact",
            Pairing::Greedy => "greedy",
        }
    }
}

/// Pair up `d` items to maximize the summed symmetric weight `w[p*d + q]`.
///
/// With odd `d` one item stays single. Exact for `d ≤ 16`, greedy
/// heaviest-edge-first above.
pub fn max_weight_pairing(w: &[f64], d: usize) -> (Vec<Vec<usize>>, Pairing) {
    assert_eq!(w.len(), d * d, "weight matrix must be d × d");
    if d <= EXACT_MATCHING_MAX_DIM {
        (exact_pairing(w, d), Pairing::Exact)
    } else {
        (greedy_pairing(w, d), Pairing::Greedy)
    }
}

fn exact_pairing(w: &[f64], d: usize) -> Vec<Vec<usize>> {
    if d == 0 {
        return Vec::new();
    }
    let full = (1usize << d) - 1;
    // best[mask]: max weight for covering `mask`, one singleton allowed iff
    // popcount(mask) is odd. choice[mask]: partner of the lowest item, or
    // usize::MAX for the singleton.
    let mut best = vec![f64::NEG_INFINITY; 1 << d];
    let mut choice = vec![usize::MAX; 1 << d];
    best[0] = 0.0;
    for mask in 1..=full {
        let i = mask.trailing_zeros() as usize;
        let rest = mask & !(1 << i);
        if mask.count_ones() % 2 == 1 && best[rest] > best[mask] {
            best[mask] = best[rest];
            choice[mask] = usize::MAX;
        }
        let mut others = rest;
        while others != 0 {
            let j = others.trailing_zeros() as usize;
            others &= others - 1;
            let v = w[i * d + j] + best[rest & !(1 << j)];
            if v > best[mask] {
                best[mask] = v;
                choice[mask] = j;
            }
        }
    }
    let mut out = Vec::new();
    let mut mask = full;
    while mask != 0 {
        let i = mask.trailing_zeros() as usize;
        match choice[mask] {
            usize::MAX => {
                out.push(vec![i]);
                mask &= !(1 << i);
            }
            j => {
                out.push(vec![i, j]);
                mask &= !((1 << i) | (1 << j));
            }
        }
    }
    out
}

fn greedy_pairing(w: &[f64], d: usize) -> Vec<Vec<usize>> {
    let mut edges: Vec<(usize, usize)> = (0..d).flat_map(|p| (p + 1..d).map(move |q| (p, q))).collect();
    edges.sort_by(|a, b| w[b.0 * d + b.1].total_cmp(&w[a.0 * d + a.1]).then(a.cmp(b)));
    let mut used = vec![false; d];
    let mut out = Vec::with_capacity(d / 2 + 1);
    for (p, q) in edges {
        if !used[p] && !used[q] {
            used[p] = true;
            used[q] = true;
            out.push(vec![p, q]);
        }
    }
    out.extend((0..d).filter(|&q| !used[q]).map(|q| vec![q]));
    out
}

/// Pair coordinates so that the summed distance correlation within pairs is
/// maximal.
pub fn form_blocks(data: &DataSequence, block_size: usize) -> Result<(BlockPartition, Pairing)> {
    if block_size != 2 {
        return Err(Error::UnsupportedBlockSize(block_size));
    }
    let d = data.d();
    if d < 2 {
        return Err(Error::InvalidPartition(format!("need at least 2 coordinates, got {d}")));
    }
    let w = pairwise_distance_correlation(data);
    let (blocks, pairing) = max_weight_pairing(&w, d);
    Ok((BlockPartition::new(blocks, d)?, pairing))
}
