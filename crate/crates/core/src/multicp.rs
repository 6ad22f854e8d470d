// SPDX-License-Identifier: MIT OR Apache-2.0

//! Multiple change-points by recursive segmentation.
//!
//! For a prefix window `1..s` split at `t`, the number `r` of zeros among
//! `1..t` is hypergeometric given the number `m1` of zeros in the window, so
//! the windowed impurity has a conditional p-value `p_{t,s}` that does not
//! depend on the data distribution. The smallest of these over the admissible
//! grid, `p_min`, is itself calibrated against its permutation law. On
//! rejection the sequence is cut at the minimizing `t` and both sides are
//! analysed again.

use std::collections::HashMap;
use std::io::Write;
use std::sync::{Arc, Mutex, OnceLock};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use crate::nulldist::{decide, Decision, NullKey, Statistic};
use crate::pipeline::{cluster_sequence, metadata, DetectorConfig};
use crate::rng::{derive_seed, stream, stream_rng};
use crate::singlecp::{approx_eq, definitely_less, ImpurityKind};
use crate::{
    ChangePointReport, CutoffCache, DataSequence, DissimilaritySpec, Error, Labeling, NodeRecord, Result, REPORT_SCHEMA,
};

/// Largest window length kept in the precomputed p-value tables. Longer
/// windows are evaluated on demand.
pub const TABLE_MAX_LEN: usize = 100;

/// Windows up to this length use exact integer hypergeometric weights.
const EXACT_WEIGHT_MAX_LEN: usize = 128;

fn pascal() -> &'static Vec<Vec<u128>> {
    static PASCAL: OnceLock<Vec<Vec<u128>>> = OnceLock::new();
    PASCAL.get_or_init(|| {
        let mut rows: Vec<Vec<u128>> = vec![vec![1]];
        for n in 1..=EXACT_WEIGHT_MAX_LEN {
            let prev = &rows[n - 1];
            let mut row = vec![1u128; n + 1];
            for k in 1..n {
                row[k] = prev[k - 1] + prev[k];
            }
            rows.push(row);
        }
        rows
    })
}

#[inline]
fn r_range(s: usize, t: usize, m1: usize) -> (usize, usize) {
    ((t + m1).saturating_sub(s), t.min(m1))
}

/// `p_{t,s}` for every feasible `r`, indexed from `r_range(..).0`.
fn cell_pvalues(kind: ImpurityKind, s: usize, t: usize, m1: usize) -> Vec<f64> {
    let (lo, hi) = r_range(s, t, m1);
    let imp: Vec<f64> = (lo..=hi).map(|r| kind.split_value(s, t, m1, r)).collect();
    let mut order: Vec<usize> = (0..imp.len()).collect();
    order.sort_by(|&a, &b| imp[a].total_cmp(&imp[b]));
    let mut out = vec![0.0; imp.len()];
    if s <= EXACT_WEIGHT_MAX_LEN {
        let c = pascal();
        let w = |r: usize| c[m1][r] * c[s - m1][t - r];
        let total = c[s][t] as f64;
        let mut acc: u128 = 0;
        let mut i = 0;
        while i < order.len() {
            let mut j = i;
            while j < order.len() && approx_eq(imp[order[j]], imp[order[i]]) {
                acc += w(lo + order[j]);
                j += 1;
            }
            let p = (acc as f64 / total).min(1.0);
            for &k in &order[i..j] {
                out[k] = p;
            }
            i = j;
        }
    } else {
        let (m1u, su, tu) = (m1 as u64, s as u64, t as u64);
        let ln_total = ln_binomial(su, tu);
        let w = |r: usize| (ln_binomial(m1u, r as u64) + ln_binomial(su - m1u, tu - r as u64) - ln_total).exp();
        let mut acc = 0.0;
        let mut i = 0;
        while i < order.len() {
            let mut j = i;
            while j < order.len() && approx_eq(imp[order[j]], imp[order[i]]) {
                acc += w(lo + order[j]);
                j += 1;
            }
            for &k in &order[i..j] {
                out[k] = acc.min(1.0);
            }
            i = j;
        }
    }
    out
}

/// Precomputed `p_{t,s}` for all `(s, t, m1, r)` with `s ≤ smax`.
pub struct PValueTable {
    kind: ImpurityKind,
    smax: usize,
    /// Start of each `(s, t, m1)` cell in `values`.
    starts: Vec<usize>,
    /// Offset of window length `s` in `starts`.
    s_offset: Vec<usize>,
    values: Vec<f64>,
}

impl PValueTable {
    fn build(kind: ImpurityKind, smax: usize) -> Self {
        let mut s_offset = vec![0; smax + 2];
        for s in 2..=smax {
            s_offset[s + 1] = s_offset[s] + (s - 1) * (s + 1);
        }
        let per_s: Vec<Vec<Vec<f64>>> = (2..=smax)
            .into_par_iter()
            .map(|s| {
                let mut cells = Vec::with_capacity((s - 1) * (s + 1));
                for t in 1..s {
                    for m1 in 0..=s {
                        cells.push(cell_pvalues(kind, s, t, m1));
                    }
                }
                cells
            })
            .collect();
        let mut starts = Vec::with_capacity(s_offset[smax + 1]);
        let mut values = Vec::new();
        for cells in per_s {
            for c in cells {
                starts.push(values.len());
                values.extend(c);
            }
        }
        Self {
            kind,
            smax,
            starts,
            s_offset,
            values,
        }
    }

    pub fn kind(&self) -> ImpurityKind {
        self.kind
    }

    pub fn max_len(&self) -> usize {
        self.smax
    }

    /// `p_{t,s}` given `m1` zeros in the window and `r` in the left part.
    #[inline]
    pub fn pvalue(&self, s: usize, t: usize, m1: usize, r: usize) -> f64 {
        let lo = r_range(s, t, m1).0;
        if s <= self.smax {
            let cell = self.s_offset[s] + (t - 1) * (s + 1) + m1;
            self.values[self.starts[cell] + r - lo]
        } else {
            cell_pvalues(self.kind, s, t, m1)[r - lo]
        }
    }

    /// Smallest admissible `p_{t,s}` and its `(t, s)` (1-based), with ties
    /// going to the smallest `s`, then the smallest `t`. `None` if the
    /// sequence is shorter than `2·min_gap`.
    #[allow(clippy::needless_range_loop)]
    pub fn scan(&self, labels: &[u8], min_gap: usize) -> Option<(f64, usize, usize)> {
        let n = labels.len();
        if n < 2 * min_gap {
            return None;
        }
        let zeros = prefix_zeros(labels);
        let mut best: Option<(f64, usize, usize)> = None;
        for s in 2 * min_gap..=n {
            let m1 = zeros[s];
            for t in min_gap..=s - min_gap {
                let p = self.pvalue(s, t, m1, zeros[t]);
                if best.is_none_or(|b| definitely_less(p, b.0)) {
                    best = Some((p, t, s));
                }
            }
        }
        best
    }
}

fn prefix_zeros(labels: &[u8]) -> Vec<usize> {
    let mut z = Vec::with_capacity(labels.len() + 1);
    z.push(0);
    for &l in labels {
        z.push(z.last().unwrap() + usize::from(l == 0));
    }
    z
}

/// Shared table for `kind` covering windows up to `n` (capped at
/// [`TABLE_MAX_LEN`]).
pub fn pvalue_table(kind: ImpurityKind, n: usize) -> Arc<PValueTable> {
    static TABLES: OnceLock<Mutex<HashMap<ImpurityKind, Arc<PValueTable>>>> = OnceLock::new();
    let want = n.clamp(2, TABLE_MAX_LEN);
    let tables = TABLES.get_or_init(Default::default);
    let mut guard = tables.lock().unwrap_or_else(|e| e.into_inner());
    if let Some(t) = guard.get(&kind) {
        if t.smax >= want {
            return t.clone();
        }
    }
    // grow in steps so that a sweep over sizes does not rebuild every time
    let size = want.next_multiple_of(16).min(TABLE_MAX_LEN);
    let table = Arc::new(PValueTable::build(kind, size));
    guard.insert(kind, table.clone());
    table
}

fn check_window(labels: &Labeling, t: usize, s: usize) -> Result<()> {
    let n = labels.len();
    if s > n || s < 2 {
        return Err(Error::IndexOutOfRange { index: s, lo: 2, hi: n });
    }
    if t == 0 || t >= s {
        return Err(Error::IndexOutOfRange {
            index: t,
            lo: 1,
            hi: s - 1,
        });
    }
    Ok(())
}

fn window_counts(labels: &Labeling, t: usize, s: usize) -> (usize, usize) {
    let l = labels.labels();
    let r = l[..t].iter().filter(|&&x| x == 0).count();
    let m1 = r + l[t..s].iter().filter(|&&x| x == 0).count();
    (m1, r)
}

/// Impurity of the prefix window `1..s` split after `t`.
pub fn window_impurity(labels: &Labeling, t: usize, s: usize, kind: ImpurityKind) -> Result<f64> {
    check_window(labels, t, s)?;
    let (m1, r) = window_counts(labels, t, s);
    Ok(kind.split_value(s, t, m1, r))
}

/// Conditional p-value `P(I(R) ≤ I(r_obs))` of the windowed impurity.
pub fn window_pvalue(labels: &Labeling, t: usize, s: usize, kind: ImpurityKind) -> Result<f64> {
    check_window(labels, t, s)?;
    let (m1, r) = window_counts(labels, t, s);
    Ok(cell_pvalues(kind, s, t, m1)[r - r_range(s, t, m1).0])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub t: usize,
    pub s: usize,
    pub impurity: f64,
    pub pvalue: f64,
}

/// All admissible `(t, s)` cells of one label sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowPValueGrid {
    pub min_gap: usize,
    pub cells: Vec<GridCell>,
    pub t0: usize,
    pub s0: usize,
    pub p_min: f64,
}

impl WindowPValueGrid {
    /// CSV with header `t,s,impurity,pvalue`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,s,impurity,pvalue")?;
        for c in &self.cells {
            writeln!(w, "{},{},{},{}", c.t, c.s, c.impurity, c.pvalue)?;
        }
        Ok(())
    }
}

/// Full admissible grid: `t ≥ min_gap` and `s − t ≥ min_gap`.
#[allow(clippy::needless_range_loop)]
pub fn pmin_scan(labels: &Labeling, min_gap: usize, kind: ImpurityKind) -> Result<WindowPValueGrid> {
    let n = labels.len();
    if min_gap < 2 {
        return Err(Error::InvalidConfig("min_gap must be >= 2".into()));
    }
    if n < 2 * min_gap {
        return Err(Error::TooShort { len: n, min_gap });
    }
    let table = pvalue_table(kind, n);
    let zeros = prefix_zeros(labels.labels());
    let mut cells = Vec::new();
    for s in 2 * min_gap..=n {
        let m1 = zeros[s];
        for t in min_gap..=s - min_gap {
            let r = zeros[t];
            cells.push(GridCell {
                t,
                s,
                impurity: kind.split_value(s, t, m1, r),
                pvalue: table.pvalue(s, t, m1, r),
            });
        }
    }
    let (p_min, t0, s0) = table.scan(labels.labels(), min_gap).expect("grid is non-empty");
    Ok(WindowPValueGrid {
        min_gap,
        cells,
        t0,
        s0,
        p_min,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PMinTest {
    pub grid: WindowPValueGrid,
    pub decision: Decision,
    pub null_method: Option<String>,
}

/// Randomized level-α test of `p_min` against its permutation law given the
/// label counts. A constant labeling is accepted outright.
pub fn pmin_test(labels: &Labeling, config: &DetectorConfig, cache: &CutoffCache, coin: f64) -> Result<PMinTest> {
    let grid = pmin_scan(labels, config.min_gap, config.impurity)?;
    if labels.is_constant() {
        return Ok(PMinTest {
            grid,
            decision: Decision::accept_degenerate(coin),
            null_method: None,
        });
    }
    let key = NullKey::new(
        Statistic::PMin {
            min_gap: config.min_gap,
            impurity: config.impurity,
        },
        labels.n1(),
        labels.n2(),
        &config.pmin_policy(),
    );
    let dist = cache.distribution(&key)?;
    let decision = decide(&dist, config.alpha, grid.p_min, coin)?;
    Ok(PMinTest {
        grid,
        decision,
        null_method: Some(dist.method.name()),
    })
}

/// Recursive segmentation of `data`. Each segment is re-clustered from its
/// own dissimilarities before testing.
pub fn segment(
    data: &DataSequence,
    spec: &DissimilaritySpec,
    config: &DetectorConfig,
    cache: &CutoffCache,
) -> Result<ChangePointReport> {
    config.validate()?;
    if data.n() < 2 * config.min_gap {
        return Err(Error::TooShort {
            len: data.n(),
            min_gap: config.min_gap,
        });
    }
    let nodes = segment_rec(data, spec, config, cache, 0, data.n(), 0, config.seed)?;
    let mut changepoints: Vec<usize> = nodes.iter().filter(|n| n.reject).filter_map(|n| n.split).collect();
    changepoints.sort_unstable();
    Ok(ChangePointReport {
        schema: REPORT_SCHEMA.to_string(),
        changepoints,
        nodes,
        metadata: metadata(data, config, "multi"),
    })
}

/// Nodes of the subtree for rows `lo..hi`, in pre-order.
#[allow(clippy::too_many_arguments)]
fn segment_rec(
    data: &DataSequence,
    spec: &DissimilaritySpec,
    config: &DetectorConfig,
    cache: &CutoffCache,
    lo: usize,
    hi: usize,
    depth: usize,
    seed: u64,
) -> Result<Vec<NodeRecord>> {
    if hi - lo < 2 * config.min_gap || depth >= config.max_depth {
        return Ok(Vec::new());
    }
    let part = data.slice(lo, hi)?;
    let labels = cluster_sequence(&part, spec, config, seed)?;
    let coin: f64 = stream_rng(seed, stream::COIN).random();
    let test = pmin_test(&labels, config, cache, coin)?;
    let node = NodeRecord {
        lo: lo + 1,
        hi,
        depth,
        n1: labels.n1(),
        n2: labels.n2(),
        split: Some(lo + test.grid.t0),
        window_end: Some(lo + test.grid.s0),
        statistic: Some(test.grid.p_min),
        p_value: test.decision.p_value,
        threshold: test.decision.threshold,
        gamma: test.decision.gamma,
        coin,
        reject: test.decision.reject,
        null_method: test.null_method,
        labels: labels.to_string(),
    };
    let mut out = vec![node];
    if test.decision.reject {
        let cut = lo + test.grid.t0;
        let branch = derive_seed(seed, stream::BRANCH);
        let (left, right) = rayon::join(
            || segment_rec(data, spec, config, cache, lo, cut, depth + 1, derive_seed(branch, 0)),
            || segment_rec(data, spec, config, cache, cut, hi, depth + 1, derive_seed(branch, 1)),
        );
        out.extend(left?);
        out.extend(right?);
    }
    Ok(out)
}
