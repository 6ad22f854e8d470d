// SPDX-License-Identifier: MIT OR Apache-2.0

//! Single change-point statistics on a cluster label sequence.
//!
//! For a split after observation `t`, the Rand index `R(t)` is the fraction
//! of pairs on which the clustering and the split disagree, and the impurity
//! `I(t)` is the size-weighted impurity of the label-0 proportion on both
//! sides. Away from the two ends of the sequence, neither can be minimal at a
//! split between equal labels, and the test statistic is the minimum over
//! label boundaries.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::nulldist::{decide, CutoffCache, Decision, NullKey, Statistic};
use crate::pipeline::{cluster_sequence, metadata, DetectorConfig, SplitStatistic};
use crate::rng::{stream, stream_rng};
use crate::{ChangePointReport, DataSequence, DissimilaritySpec, Error, Labeling, NodeRecord, Result, REPORT_SCHEMA};

/// Relative tolerance used when comparing statistic values.
pub const TIE_TOL: f64 = 1e-12;

#[inline]
pub(crate) fn approx_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_TOL * a.abs().max(b.abs()).max(1.0)
}

#[inline]
pub(crate) fn definitely_less(a: f64, b: f64) -> bool {
    a < b && !approx_eq(a, b)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImpurityKind {
    /// `2p(1 − p)`
    Gini,
    /// `−(1 − p) ln(1 − p) − p ln p`
    Entropy,
    /// `min(p, 1 − p)`
    Misclassification,
}

impl ImpurityKind {
    #[inline]
    pub fn phi(self, p: f64) -> f64 {
        match self {
            ImpurityKind::Gini => 2.0 * p * (1.0 - p),
            ImpurityKind::Entropy => {
                let xlnx = |x: f64| if x <= 0.0 { 0.0 } else { x * x.ln() };
                -xlnx(1.0 - p) - xlnx(p)
            }
            ImpurityKind::Misclassification => p.min(1.0 - p),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ImpurityKind::Gini => "gini",
            ImpurityKind::Entropy => "entropy",
            ImpurityKind::Misclassification => "misclassification",
        }
    }

    /// `(t/s) Φ(r/t) + ((s−t)/s) Φ((m−r)/(s−t))` for a length-`s` window
    /// with `m` zeros, `r` of them among the first `t`.
    #[inline]
    pub(crate) fn split_value(self, s: usize, t: usize, m: usize, r: usize) -> f64 {
        let (sf, tf) = (s as f64, t as f64);
        let left = self.phi(r as f64 / tf);
        let right = self.phi((m - r) as f64 / (sf - tf));
        tf / sf * left + (sf - tf) / sf * right
    }
}

impl std::str::FromStr for ImpurityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gini" => Ok(Self::Gini),
            "entropy" => Ok(Self::Entropy),
            "misclassification" => Ok(Self::Misclassification),
            other => Err(Error::InvalidConfig(format!("unknown impurity `{other}`"))),
        }
    }
}

fn check_t(labels: &Labeling, t: usize) -> Result<()> {
    let n = labels.len();
    if t == 0 || t >= n {
        return Err(Error::IndexOutOfRange {
            index: t,
            lo: 1,
            hi: n.saturating_sub(1),
        });
    }
    Ok(())
}

/// Pairwise-disagreement count `C(n,2)·R(t)` from prefix counts.
#[inline]
fn rand_disagreements(n1: usize, n2: usize, t: usize, zeros_before: usize) -> u64 {
    let (t01, t02) = (zeros_before as i64, (t - zeros_before) as i64);
    let a = n1 as i64 - t01 + t02;
    let b = n2 as i64 - t02 + t01;
    (a * b) as u64
}

#[inline]
fn pairs(n: usize) -> f64 {
    (n * (n - 1) / 2) as f64
}

/// Rand index between the clustering and the split after `t` (1-based).
pub fn rand_index_at(labels: &Labeling, t: usize) -> Result<f64> {
    check_t(labels, t)?;
    let zeros = labels.labels()[..t].iter().filter(|&&l| l == 0).count();
    Ok(rand_disagreements(labels.n1(), labels.n2(), t, zeros) as f64 / pairs(labels.len()))
}

/// Average impurity of the split after `t` (1-based).
pub fn impurity_at(labels: &Labeling, t: usize, kind: ImpurityKind) -> Result<f64> {
    check_t(labels, t)?;
    let zeros = labels.labels()[..t].iter().filter(|&&l| l == 0).count();
    Ok(kind.split_value(labels.len(), t, labels.n1(), zeros))
}

/// Split positions `t` (1-based) with different labels at `t` and `t + 1`.
pub fn candidate_splits(labels: &Labeling) -> Vec<usize> {
    labels
        .labels()
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] != w[1])
        .map(|(i, _)| i + 1)
        .collect()
}

/// Statistic values for `t = 1..n−1` from a raw label slice.
pub fn statistic_values(labels: &[u8], statistic: SplitStatistic) -> Vec<f64> {
    let n = labels.len();
    let n1 = labels.iter().filter(|&&l| l == 0).count();
    let mut out = Vec::with_capacity(n.saturating_sub(1));
    let mut zeros = 0;
    for t in 1..n {
        zeros += usize::from(labels[t - 1] == 0);
        out.push(match statistic {
            SplitStatistic::Rand => rand_disagreements(n1, n - n1, t, zeros) as f64 / pairs(n),
            SplitStatistic::Impurity(kind) => kind.split_value(n, t, n1, zeros),
        });
    }
    out
}

/// Minimum over the boundary candidates (or over all `t` when the labeling is
/// constant), as used by the arrangement null.
pub(crate) fn arrangement_min(labels: &[u8], statistic: SplitStatistic) -> f64 {
    let values = statistic_values(labels, statistic);
    let mut best = f64::INFINITY;
    let mut any_boundary = false;
    for t in 1..labels.len() {
        if labels[t - 1] != labels[t] {
            any_boundary = true;
            best = best.min(values[t - 1]);
        }
    }
    if any_boundary {
        best
    } else {
        values.into_iter().fold(f64::INFINITY, f64::min)
    }
}

/// Per-split statistic values and the chosen minimizer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitTrace {
    pub statistic: SplitStatistic,
    /// `values[t − 1]` is the statistic at split `t`.
    pub values: Vec<f64>,
    pub candidates: Vec<usize>,
    pub argmin: usize,
    pub min: f64,
}

impl SplitTrace {
    /// CSV with header `t,value,is_candidate`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,value,is_candidate")?;
        let mut cand = self.candidates.iter().peekable();
        for (i, v) in self.values.iter().enumerate() {
            let t = i + 1;
            let is_cand = cand.peek() == Some(&&t);
            if is_cand {
                cand.next();
            }
            writeln!(w, "{t},{v},{}", u8::from(is_cand))?;
        }
        Ok(())
    }
}

/// Smallest minimizer of the statistic over the boundary candidates.
pub fn minimize_statistic(labels: &Labeling, statistic: SplitStatistic) -> Result<SplitTrace> {
    let candidates = candidate_splits(labels);
    if candidates.is_empty() {
        return Err(Error::ConstantLabeling);
    }
    let values = statistic_values(labels.labels(), statistic);
    let mut argmin = candidates[0];
    for &t in &candidates[1..] {
        if definitely_less(values[t - 1], values[argmin - 1]) {
            argmin = t;
        }
    }
    Ok(SplitTrace {
        statistic,
        min: values[argmin - 1],
        values,
        candidates,
        argmin,
    })
}

/// Outcome of testing one label sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelTest {
    pub trace: Option<SplitTrace>,
    pub decision: Decision,
    pub null_method: Option<String>,
}

/// Level-α randomized test on a fixed labeling. A constant labeling is
/// accepted with p-value 1.
pub fn test_labeling(labels: &Labeling, config: &DetectorConfig, cache: &CutoffCache, coin: f64) -> Result<LabelTest> {
    let trace = match minimize_statistic(labels, config.statistic) {
        Ok(t) => t,
        Err(Error::ConstantLabeling) => {
            return Ok(LabelTest {
                trace: None,
                decision: Decision::accept_degenerate(coin),
                null_method: None,
            })
        }
        Err(e) => return Err(e),
    };
    let key = NullKey::new(
        Statistic::from(config.statistic),
        labels.n1(),
        labels.n2(),
        &config.null,
    );
    let dist = cache.distribution(&key)?;
    let decision = decide(&dist, config.alpha, trace.min, coin)?;
    Ok(LabelTest {
        trace: Some(trace),
        decision,
        null_method: Some(dist.method.name()),
    })
}

/// Full single change-point analysis: dissimilarities, 2-means, split scan
/// and randomized permutation test.
pub fn single_changepoint_test(
    data: &DataSequence,
    spec: &DissimilaritySpec,
    config: &DetectorConfig,
    cache: &CutoffCache,
) -> Result<ChangePointReport> {
    config.validate()?;
    if data.n() < 4 {
        return Err(Error::TooShort {
            len: data.n(),
            min_gap: 2,
        });
    }
    let labels = cluster_sequence(data, spec, config, config.seed)?;
    let coin: f64 = stream_rng(config.seed, stream::COIN).random();
    let outcome = test_labeling(&labels, config, cache, coin)?;
    let split = outcome.trace.as_ref().map(|t| t.argmin);
    let node = NodeRecord {
        lo: 1,
        hi: data.n(),
        depth: 0,
        n1: labels.n1(),
        n2: labels.n2(),
        split,
        window_end: None,
        statistic: outcome.trace.as_ref().map(|t| t.min),
        p_value: outcome.decision.p_value,
        threshold: outcome.decision.threshold,
        gamma: outcome.decision.gamma,
        coin,
        reject: outcome.decision.reject,
        null_method: outcome.null_method,
        labels: labels.to_string(),
    };
    let changepoints = match (node.reject, split) {
        (true, Some(t)) => vec![t],
        _ => Vec::new(),
    };
    Ok(ChangePointReport {
        schema: REPORT_SCHEMA.to_string(),
        changepoints,
        nodes: vec![node],
        metadata: metadata(data, config, "single"),
    })
}
