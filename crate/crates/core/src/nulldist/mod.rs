// SPDX-License-Identifier: MIT OR Apache-2.0

//! Permutation laws of the split statistics.
//!
//! Under no change, every arrangement of `n1` zeros and `n2` ones is equally
//! likely, whatever the data distribution. The law of a statistic over these
//! arrangements is computed exactly when there are few enough of them and by
//! Monte Carlo otherwise, then turned into a randomized level-α test.

mod cache;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use cache::{CutoffCache, CACHE_DIR_ENV, CACHE_VERSION};

use crate::multicp::pvalue_table;
use crate::pipeline::SplitStatistic;
use crate::rng::{derive_seed, stream, stream_rng};
use crate::singlecp::{approx_eq, arrangement_min, definitely_less, ImpurityKind};
use crate::{Error, Result};

/// Default seed of the permutation streams. It is fixed and independent of
/// the analysis seed so that null laws can be shared between runs.
pub const DEFAULT_NULL_SEED: u64 = 0x005E_ED0F_4E55;

/// Draws per Monte Carlo work unit. Each unit has its own stream, so results
/// do not depend on the thread count.
const CHUNK: usize = 2048;

/// Statistic whose permutation law is tabulated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Statistic {
    RandMin,
    ImpurityMin { impurity: ImpurityKind },
    PMin { min_gap: usize, impurity: ImpurityKind },
}

impl From<SplitStatistic> for Statistic {
    fn from(s: SplitStatistic) -> Self {
        match s {
            SplitStatistic::Rand => Statistic::RandMin,
            SplitStatistic::Impurity(impurity) => Statistic::ImpurityMin { impurity },
        }
    }
}

impl Statistic {
    pub fn id(&self) -> String {
        match self {
            Statistic::RandMin => "rand_min".into(),
            Statistic::ImpurityMin { impurity } => format!("{}_min", impurity.name()),
            Statistic::PMin { min_gap, impurity } => format!("pmin_{}_g{min_gap}", impurity.name()),
        }
    }

    fn evaluator(&self, n: usize) -> Evaluator {
        match *self {
            Statistic::RandMin => Evaluator::Split(SplitStatistic::Rand),
            Statistic::ImpurityMin { impurity } => Evaluator::Split(SplitStatistic::Impurity(impurity)),
            Statistic::PMin { min_gap, impurity } => Evaluator::PMin {
                min_gap,
                table: pvalue_table(impurity, n),
            },
        }
    }
}

enum Evaluator {
    Split(SplitStatistic),
    PMin {
        min_gap: usize,
        table: std::sync::Arc<crate::multicp::PValueTable>,
    },
}

impl Evaluator {
    fn eval(&self, labels: &[u8]) -> f64 {
        match self {
            Evaluator::Split(s) => arrangement_min(labels, *s),
            Evaluator::PMin { min_gap, table } => table.scan(labels, *min_gap).map(|(p, _, _)| p).unwrap_or(1.0),
        }
    }
}

/// Knobs for computing null laws.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NullPolicy {
    /// Enumerate exactly when `C(n, n1)` is at most this.
    pub exact_cap: u64,
    /// Monte Carlo sample size otherwise.
    pub permutations: usize,
    pub seed: u64,
}

impl Default for NullPolicy {
    fn default() -> Self {
        Self {
            exact_cap: 2_000_000,
            permutations: 100_000,
            seed: DEFAULT_NULL_SEED,
        }
    }
}

/// How a null law was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum NullMethod {
    Exact,
    MonteCarlo { permutations: usize, seed: u64 },
}

impl NullMethod {
    pub fn name(&self) -> String {
        match self {
            NullMethod::Exact => "exact".into(),
            NullMethod::MonteCarlo { .. } => "monte_carlo".into(),
        }
    }
}

/// Everything that determines a null law.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NullKey {
    pub statistic: Statistic,
    pub n1: usize,
    pub n2: usize,
    pub method: NullMethod,
}

impl NullKey {
    /// Resolve the method from the policy. The p_min law is enumerated
    /// whenever that takes no more evaluations than sampling would.
    pub fn new(statistic: Statistic, n1: usize, n2: usize, policy: &NullPolicy) -> Self {
        let count = binomial(n1 + n2, n1);
        let cap = match statistic {
            Statistic::PMin { .. } => policy.permutations as u64,
            _ => policy.exact_cap,
        };
        let method = if count <= u128::from(cap) {
            NullMethod::Exact
        } else {
            NullMethod::MonteCarlo {
                permutations: policy.permutations,
                seed: policy.seed,
            }
        };
        Self {
            statistic,
            n1,
            n2,
            method,
        }
    }

    pub fn file_stem(&self) -> String {
        let method = match self.method {
            NullMethod::Exact => "exact".to_string(),
            NullMethod::MonteCarlo { permutations, seed } => format!("mc{permutations}-s{seed:x}"),
        };
        format!("{}-{}-{}-{method}", self.statistic.id(), self.n1, self.n2)
    }
}

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Discrete law on a sorted support.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NullDistribution {
    pub statistic: Statistic,
    pub n1: usize,
    pub n2: usize,
    pub method: NullMethod,
    pub support: Vec<f64>,
    pub probs: Vec<f64>,
}

impl NullDistribution {
    pub fn key(&self) -> NullKey {
        NullKey {
            statistic: self.statistic,
            n1: self.n1,
            n2: self.n2,
            method: self.method,
        }
    }

    /// Index of the support point equal to `x`, if any.
    fn position(&self, x: f64) -> std::result::Result<usize, usize> {
        let idx = self.support.partition_point(|&s| definitely_less(s, x));
        if idx < self.support.len() && approx_eq(self.support[idx], x) {
            Ok(idx)
        } else {
            Err(idx)
        }
    }

    /// `P(Z < x)`.
    pub fn prob_below(&self, x: f64) -> f64 {
        let idx = match self.position(x) {
            Ok(i) | Err(i) => i,
        };
        self.probs[..idx].iter().sum()
    }

    /// `P(Z = x)`.
    pub fn prob_at(&self, x: f64) -> f64 {
        self.position(x).map(|i| self.probs[i]).unwrap_or(0.0)
    }

    /// `P(Z ≤ x)`.
    pub fn p_value(&self, x: f64) -> f64 {
        (self.prob_below(x) + self.prob_at(x)).min(1.0)
    }

    pub fn threshold(&self, alpha: f64) -> Result<RandomizedThreshold> {
        randomized_threshold(self, alpha)
    }
}

fn merge_values(mut values: Vec<f64>) -> (Vec<f64>, Vec<f64>) {
    values.sort_by(f64::total_cmp);
    let total = values.len() as f64;
    let mut support: Vec<f64> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for v in values {
        match support.last() {
            Some(&s) if approx_eq(s, v) => *counts.last_mut().unwrap() += 1,
            _ => {
                support.push(v);
                counts.push(1);
            }
        }
    }
    let probs = counts.into_iter().map(|c| c as f64 / total).collect();
    (support, probs)
}

/// Advance a sorted index combination of `0..n`; false after the last one.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Law over all `C(n1+n2, n1)` arrangements. Fails with [`Error::TooLarge`]
/// above `cap`.
pub fn exact_null(statistic: Statistic, n1: usize, n2: usize, cap: u64) -> Result<NullDistribution> {
    let n = n1 + n2;
    if n < 2 {
        return Err(Error::TooFewPoints(n));
    }
    let count = binomial(n, n1);
    if count > u128::from(cap) {
        return Err(Error::TooLarge {
            arrangements: count,
            cap,
        });
    }
    let eval = statistic.evaluator(n);
    let mut values = Vec::with_capacity(count as usize);
    let mut idx: Vec<usize> = (0..n1).collect();
    let mut labels = vec![1u8; n];
    loop {
        labels.fill(1);
        for &i in &idx {
            labels[i] = 0;
        }
        values.push(eval.eval(&labels));
        if !next_combination(&mut idx, n) {
            break;
        }
    }
    let (support, probs) = merge_values(values);
    Ok(NullDistribution {
        statistic,
        n1,
        n2,
        method: NullMethod::Exact,
        support,
        probs,
    })
}

/// Law estimated from `permutations` uniform arrangements.
pub fn monte_carlo_null(
    statistic: Statistic,
    n1: usize,
    n2: usize,
    permutations: usize,
    seed: u64,
) -> Result<NullDistribution> {
    let n = n1 + n2;
    if n < 2 {
        return Err(Error::TooFewPoints(n));
    }
    if permutations == 0 {
        return Err(Error::InvalidConfig("permutations must be >= 1".into()));
    }
    let eval = statistic.evaluator(n);
    let chunks = permutations.div_ceil(CHUNK);
    let values: Vec<f64> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = stream_rng(derive_seed(seed, c as u64), stream::NULL);
            let mut labels: Vec<u8> = (0..n).map(|i| u8::from(i >= n1)).collect();
            let draws = CHUNK.min(permutations - c * CHUNK);
            let eval = &eval;
            (0..draws)
                .map(move |_| {
                    labels.shuffle(&mut rng);
                    eval.eval(&labels)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let (support, probs) = merge_values(values);
    Ok(NullDistribution {
        statistic,
        n1,
        n2,
        method: NullMethod::MonteCarlo { permutations, seed },
        support,
        probs,
    })
}

/// Compute the law named by `key`.
pub fn compute_null(key: &NullKey) -> Result<NullDistribution> {
    match key.method {
        NullMethod::Exact => exact_null(key.statistic, key.n1, key.n2, u64::MAX),
        NullMethod::MonteCarlo { permutations, seed } => {
            monte_carlo_null(key.statistic, key.n1, key.n2, permutations, seed)
        }
    }
}

/// Cut-off `r_α` and randomization probability `γ` of the level-α test that
/// rejects for small values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomizedThreshold {
    pub alpha: f64,
    pub r_alpha: f64,
    pub gamma: f64,
    /// `P(Z < r_α)`
    pub below: f64,
    /// `P(Z = r_α)`
    pub at: f64,
}

impl RandomizedThreshold {
    /// Rejection probability at `observed`.
    pub fn phi(&self, observed: f64) -> f64 {
        if approx_eq(observed, self.r_alpha) {
            self.gamma
        } else if observed < self.r_alpha {
            1.0
        } else {
            0.0
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidConfig(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// Largest support point `r` with `P(Z < r) ≤ α`, and
/// `γ = (α − P(Z < r)) / P(Z = r)`, so that `P(Z < r) + γ P(Z = r) = α`.
pub fn randomized_threshold(dist: &NullDistribution, alpha: f64) -> Result<RandomizedThreshold> {
    check_alpha(alpha)?;
    let (mut chosen, mut below, mut cum) = (0, 0.0, 0.0);
    for (k, &p) in dist.probs.iter().enumerate() {
        if cum > alpha {
            break;
        }
        (chosen, below) = (k, cum);
        cum += p;
    }
    let at = dist.probs[chosen];
    let gamma = ((alpha - below) / at).clamp(0.0, 1.0);
    Ok(RandomizedThreshold {
        alpha,
        r_alpha: dist.support[chosen],
        gamma,
        below,
        at,
    })
}

/// Result of one randomized test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub reject: bool,
    pub p_value: f64,
    pub threshold: Option<f64>,
    pub gamma: Option<f64>,
    pub coin: f64,
}

impl Decision {
    /// Acceptance used when there is nothing to test.
    pub fn accept_degenerate(coin: f64) -> Self {
        Self {
            reject: false,
            p_value: 1.0,
            threshold: None,
            gamma: None,
            coin,
        }
    }
}

/// Reject if `observed < r_α`, or if `observed = r_α` and `coin < γ`.
pub fn decide(dist: &NullDistribution, alpha: f64, observed: f64, coin: f64) -> Result<Decision> {
    let th = randomized_threshold(dist, alpha)?;
    let reject = if approx_eq(observed, th.r_alpha) {
        coin < th.gamma
    } else {
        observed < th.r_alpha
    };
    Ok(Decision {
        reject,
        p_value: dist.p_value(observed),
        threshold: Some(th.r_alpha),
        gamma: Some(th.gamma),
        coin,
    })
}
