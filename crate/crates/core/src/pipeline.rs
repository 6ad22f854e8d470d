// SPDX-License-Identifier: MIT OR Apache-2.0

//! Configuration shared by the detectors, and the top-level entry point.

use serde::{Deserialize, Serialize};

use crate::dissim::dissimilarity_matrix;
use crate::multicp::segment;
use crate::nulldist::NullPolicy;
use crate::rng::{derive_seed, stream};
use crate::robust::filter_isolated;
use crate::singlecp::{single_changepoint_test, ImpurityKind};
use crate::{
    two_means, ChangePointReport, ClusterConfig, CutoffCache, DataSequence, DissimilaritySpec, Error, Labeling, Preset,
    ReportMetadata, Result,
};

/// Split statistic for single change-point tests.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitStatistic {
    Rand,
    Impurity(ImpurityKind),
}

impl SplitStatistic {
    pub fn name(&self) -> &'static str {
        match self {
            SplitStatistic::Rand => "rand",
            SplitStatistic::Impurity(_) => "impurity",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Single,
    Multi,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Single => "single",
            Mode::Multi => "multi",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub mode: Mode,
    pub preset: Preset,
    pub statistic: SplitStatistic,
    /// Impurity used by the windowed p-values in multi mode.
    pub impurity: ImpurityKind,
    pub alpha: f64,
    pub seed: u64,
    pub cluster: ClusterConfig,
    /// Null policy for single change-point statistics.
    pub null: NullPolicy,
    /// Monte Carlo size for the p_min law (same exact cap and seed as `null`).
    pub pmin_permutations: usize,
    pub min_gap: usize,
    pub max_depth: usize,
    pub outlier_filter: bool,
    pub filter_rounds: usize,
    /// Recorded in reports only; standardize the data before calling.
    pub standardized: bool,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Single,
            preset: Preset::Delta0,
            statistic: SplitStatistic::Impurity(ImpurityKind::Gini),
            impurity: ImpurityKind::Gini,
            alpha: 0.05,
            seed: 0,
            cluster: ClusterConfig::default(),
            null: NullPolicy::default(),
            pmin_permutations: 2000,
            min_gap: 5,
            max_depth: 10,
            outlier_filter: false,
            filter_rounds: 5,
            standardized: false,
        }
    }
}

impl DetectorConfig {
    /// GI₀ / GI₁ / RI₀ / RI₁ style presets.
    pub fn method(preset: Preset, statistic: SplitStatistic) -> Self {
        Self {
            preset,
            statistic,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.min_gap < 2 {
            return Err(Error::InvalidConfig("min_gap must be >= 2".into()));
        }
        if self.null.permutations == 0 || self.pmin_permutations == 0 {
            return Err(Error::InvalidConfig("permutations must be >= 1".into()));
        }
        if self.max_depth == 0 {
            return Err(Error::InvalidConfig("max_depth must be >= 1".into()));
        }
        Ok(())
    }

    pub(crate) fn pmin_policy(&self) -> NullPolicy {
        NullPolicy {
            permutations: self.pmin_permutations,
            ..self.null.clone()
        }
    }
}

/// Dissimilarities and 2-means on `data`. An all-zero dissimilarity matrix
/// carries no information and yields the constant labeling.
pub fn cluster_sequence(
    data: &DataSequence,
    spec: &DissimilaritySpec,
    config: &DetectorConfig,
    seed: u64,
) -> Result<Labeling> {
    let d = dissimilarity_matrix(data, spec)?;
    if d.max_entry() == 0.0 {
        return Labeling::new(vec![0; data.n()]);
    }
    let cluster = ClusterConfig {
        rng_seed: derive_seed(seed, stream::CLUSTER),
        ..config.cluster.clone()
    };
    Ok(two_means(&d, &cluster)?.labeling)
}

pub(crate) fn metadata(data: &DataSequence, config: &DetectorConfig, mode: &str) -> ReportMetadata {
    ReportMetadata {
        mode: mode.to_string(),
        n: data.n(),
        d: data.d(),
        dissimilarity: config.preset.name().to_string(),
        statistic: match mode {
            "multi" => "pmin".to_string(),
            _ => config.statistic.name().to_string(),
        },
        impurity: match (mode, config.statistic) {
            ("multi", _) => config.impurity.name().to_string(),
            (_, SplitStatistic::Impurity(k)) => k.name().to_string(),
            (_, SplitStatistic::Rand) => "none".to_string(),
        },
        alpha: config.alpha,
        seed: config.seed,
        permutations: match mode {
            "multi" => config.pmin_permutations,
            _ => config.null.permutations,
        },
        null_seed: config.null.seed,
        exact_cap: config.null.exact_cap,
        min_gap: (mode == "multi").then_some(config.min_gap),
        restarts: config.cluster.restarts,
        max_iterations: config.cluster.max_iterations,
        split_inits: config.cluster.include_split_inits,
        block_pairing: None,
        standardized: config.standardized,
        removed: Vec::new(),
        input: None,
        version: env!("CARGO_PKG_VERSION").to_string(),
    }
}

/// Map 1-based positions in the filtered sequence back to original time.
fn remap(report: &mut ChangePointReport, kept: &[usize], n_original: usize) {
    let to_orig = |t: usize| kept[t - 1] + 1;
    for t in &mut report.changepoints {
        *t = to_orig(*t);
    }
    for node in &mut report.nodes {
        node.lo = to_orig(node.lo);
        node.hi = to_orig(node.hi);
        node.split = node.split.map(to_orig);
        node.window_end = node.window_end.map(to_orig);
    }
    report.metadata.n = n_original;
}

/// Run the configured analysis on `data`.
pub fn detect(data: &DataSequence, config: &DetectorConfig, cache: &CutoffCache) -> Result<ChangePointReport> {
    config.validate()?;
    let (spec, pairing) = config.preset.resolve(data)?;
    let run = |x: &DataSequence| match config.mode {
        Mode::Single => single_changepoint_test(x, &spec, config, cache),
        Mode::Multi => segment(x, &spec, config, cache),
    };
    let mut report = if config.outlier_filter {
        let filtered = filter_isolated(data, &spec, config, config.filter_rounds)?;
        let kept_data = data.select(&filtered.kept)?;
        let mut report = run(&kept_data)?;
        remap(&mut report, &filtered.kept, data.n());
        report.metadata.removed = filtered
            .removed_per_round
            .iter()
            .map(|r| r.iter().map(|i| i + 1).collect())
            .collect();
        report
    } else {
        run(data)?
    };
    report.metadata.block_pairing = pairing.map(|p| p.name().to_string());
    Ok(report)
}
