// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use hdcpd_core::datagen::Scenario;
use hdcpd_core::nulldist::CACHE_DIR_ENV;
use hdcpd_core::pipeline::Mode;
use hdcpd_core::{ImpurityKind, Preset, SplitStatistic};

#[derive(Debug, Parser)]
#[command(
    name = "hdcpd",
    version,
    about = "Change-point detection for high-dimension, low-sample-size sequences",
    long_about = "Change-point detection for high-dimension, low-sample-size sequences.\n\n\
                  CSV input has one row per time point and one column per coordinate; \
                  a non-numeric first row is treated as a header.",
    args_conflicts_with_subcommands = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<Command>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Replicated simulation study over scenarios and methods.
    Experiment(ExperimentArgs),
    /// Write a simulated scenario to CSV, with a JSON sidecar.
    Generate(GenerateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Single,
    Multi,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Single => Mode::Single,
            ModeArg::Multi => Mode::Multi,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PresetArg {
    Euclidean,
    Delta0,
    Delta1,
    #[value(name = "delta1-block")]
    Delta1Block,
}

impl From<PresetArg> for Preset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::Euclidean => Preset::Euclidean,
            PresetArg::Delta0 => Preset::Delta0,
            PresetArg::Delta1 => Preset::Delta1,
            PresetArg::Delta1Block => Preset::Delta1Block,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StatisticArg {
    Gini,
    Rand,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ImpurityArg {
    Gini,
    Entropy,
    Misclassification,
}

impl From<ImpurityArg> for ImpurityKind {
    fn from(i: ImpurityArg) -> Self {
        match i {
            ImpurityArg::Gini => ImpurityKind::Gini,
            ImpurityArg::Entropy => ImpurityKind::Entropy,
            ImpurityArg::Misclassification => ImpurityKind::Misclassification,
        }
    }
}

/// The split statistic: `rand`, or the impurity scan with `impurity`.
pub fn split_statistic(statistic: StatisticArg, impurity: ImpurityArg) -> SplitStatistic {
    match statistic {
        StatisticArg::Rand => SplitStatistic::Rand,
        StatisticArg::Gini => SplitStatistic::Impurity(impurity.into()),
    }
}

fn parse_scenario(s: &str) -> Result<Scenario, String> {
    s.parse().map_err(|e: hdcpd_core::Error| e.to_string())
}

fn parse_alpha(s: &str) -> Result<f64, String> {
    let a: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if a > 0.0 && a < 1.0 {
        Ok(a)
    } else {
        Err(format!("alpha must lie in (0, 1), got {a}"))
    }
}

/// Options shared by analyses and experiments.
#[derive(Clone, Debug, Args)]
pub struct DetectorArgs {
    #[arg(long, value_enum, default_value = "single")]
    pub mode: ModeArg,
    /// Impurity used by the gini statistic and by multi mode.
    #[arg(long, value_enum, default_value = "gini")]
    pub impurity: ImpurityArg,
    #[arg(long, default_value = "0.05", value_parser = parse_alpha)]
    pub alpha: f64,
    /// Minimum window length in multi mode.
    #[arg(long, default_value = "5", value_parser = clap::value_parser!(u64).range(2..))]
    pub min_gap: u64,
    /// Monte Carlo permutations for null laws too large to enumerate.
    #[arg(long, default_value = "100000", value_parser = clap::value_parser!(u64).range(1..))]
    pub permutations: u64,
    /// Monte Carlo permutations for the p_min law in multi mode.
    #[arg(long, default_value = "2000", value_parser = clap::value_parser!(u64).range(1..))]
    pub pmin_permutations: u64,
    /// Random balanced starts for 2-means.
    #[arg(long, default_value = "20", value_parser = clap::value_parser!(u64).range(1..))]
    pub restarts: u64,
    #[arg(long, default_value = "0")]
    pub seed: u64,
    /// Remove isolated points before testing.
    #[arg(long)]
    pub outlier_filter: bool,
    /// Coordinates per block for delta1-block.
    #[arg(long, default_value = "2", value_parser = clap::value_parser!(u64).range(2..=2))]
    pub block_size: u64,
    /// Directory of cached null laws.
    #[arg(long, env = CACHE_DIR_ENV)]
    pub cache_dir: Option<PathBuf>,
}

/// Scenario size overrides.
#[derive(Clone, Debug, Default, Args)]
pub struct ScenarioArgs {
    /// Dimension.
    #[arg(long = "dim")]
    pub d: Option<usize>,
    /// Total length of two-segment scenarios.
    #[arg(long = "length")]
    pub n: Option<usize>,
    /// Change-point of two-segment scenarios.
    #[arg(long)]
    pub tau: Option<usize>,
    /// Segment length of multi-segment scenarios.
    #[arg(long)]
    pub segment_len: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// CSV input file.
    #[arg(long, conflicts_with = "scenario", required_unless_present = "scenario")]
    pub input: Option<PathBuf>,
    /// Simulated scenario id instead of an input file.
    #[arg(long, value_parser = parse_scenario)]
    pub scenario: Option<Scenario>,
    /// Seed of the simulated data (defaults to --seed).
    #[arg(long, requires = "scenario")]
    pub data_seed: Option<u64>,
    #[command(flatten)]
    pub sizes: ScenarioArgs,
    #[arg(long, value_enum, default_value = "delta0")]
    pub dissimilarity: PresetArg,
    #[arg(long, value_enum, default_value = "gini")]
    pub statistic: StatisticArg,
    #[command(flatten)]
    pub detector: DetectorArgs,
    /// Median/MAD standardization of every coordinate.
    #[arg(long)]
    pub standardize: bool,
    /// Report JSON (stdout when absent).
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Per-split statistic trace CSV (single mode).
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Window p-value grid CSV of the first segment (multi mode).
    #[arg(long)]
    pub grid: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Scenario ids.
    #[arg(long, required = true, value_delimiter = ',', value_parser = parse_scenario)]
    pub scenarios: Vec<Scenario>,
    #[arg(long, default_value = "100", value_parser = clap::value_parser!(u64).range(1..))]
    pub replications: u64,
    /// Dissimilarities to compare; one method per dissimilarity and statistic.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "delta0")]
    pub dissimilarity: Vec<PresetArg>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "gini")]
    pub statistic: Vec<StatisticArg>,
    #[command(flatten)]
    pub sizes: ScenarioArgs,
    #[command(flatten)]
    pub detector: DetectorArgs,
    /// Summary table CSV (stdout when absent).
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Per-replication log CSV.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_parser = parse_scenario)]
    pub scenario: Scenario,
    #[arg(long, default_value = "0")]
    pub seed: u64,
    #[command(flatten)]
    pub sizes: ScenarioArgs,
    /// Output CSV; the sidecar goes to the same path with `.json` appended.
    #[arg(long)]
    pub output: PathBuf,
}
