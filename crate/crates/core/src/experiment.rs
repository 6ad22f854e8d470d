// SPDX-License-Identifier: MIT OR Apache-2.0

//! Replicated simulation runs summarised by the distance between estimated
//! and true change-points.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{build_scenario, ScenarioSpec};
use crate::pipeline::{detect, DetectorConfig, Mode};
use crate::rng::{derive_seed, mix64, stream};
use crate::{CutoffCache, Result};

/// Bins `|τ̂ − τ| = 0, 1, …, 5` and `≥ 6`.
pub const BINS: usize = 7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Method {
    pub name: String,
    pub config: DetectorConfig,
}

impl Method {
    pub fn new(name: impl Into<String>, config: DetectorConfig) -> Self {
        Self {
            name: name.into(),
            config,
        }
    }
}

impl ScenarioSpec {
    /// Scenario id with any size overrides, e.g. `sparse_loc[d=800]`.
    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if let Some(n) = self.n {
            parts.push(format!("n={n}"));
        }
        if let Some(t) = self.tau {
            parts.push(format!("tau={t}"));
        }
        if let Some(l) = self.segment_len {
            parts.push(format!("seg={l}"));
        }
        if let Some(d) = self.d {
            parts.push(format!("d={d}"));
        }
        if parts.is_empty() {
            self.scenario.id().to_string()
        } else {
            format!("{}[{}]", self.scenario.id(), parts.join(","))
        }
    }
}

/// One analysed replication.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub scenario: String,
    pub method: String,
    pub replication: usize,
    pub data_seed: u64,
    pub run_seed: u64,
    pub truth: Vec<usize>,
    pub estimate: Vec<usize>,
    pub reject: bool,
    /// Largest distance from a true change-point to the nearest estimate;
    /// `None` without detections. For a single change-point this is
    /// `|τ̂ − τ|`.
    pub error: Option<usize>,
}

impl Replication {
    /// Every truth found exactly.
    pub fn exact_hit(&self) -> bool {
        self.error == Some(0)
    }

    /// Number of true change-points with an estimate within `tol`.
    pub fn truths_within(&self, tol: usize) -> usize {
        self.truth
            .iter()
            .filter(|&&t| self.estimate.iter().any(|&e| e.abs_diff(t) <= tol))
            .count()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scenario: String,
    pub method: String,
    pub bins: [usize; BINS],
    pub detections: usize,
    pub replications: usize,
}

impl SummaryRow {
    pub fn exact_hit_rate(&self) -> f64 {
        self.bins[0] as f64 / self.replications as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub rows: Vec<SummaryRow>,
    pub log: Vec<Replication>,
}

impl ExperimentResult {
    pub fn row(&self, scenario: &str, method: &str) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.scenario == scenario && r.method == method)
    }

    pub fn replications<'a>(
        &'a self,
        scenario: &'a str,
        method: &'a str,
    ) -> impl Iterator<Item = &'a Replication> + 'a {
        self.log
            .iter()
            .filter(move |r| r.scenario == scenario && r.method == method)
    }

    /// Header `scenario,method,d0,…,d5,d6plus,detections,replications`.
    pub fn write_table<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "scenario,method,d0,d1,d2,d3,d4,d5,d6plus,detections,replications")?;
        for r in &self.rows {
            let bins: Vec<String> = r.bins.iter().map(usize::to_string).collect();
            writeln!(
                w,
                "{},{},{},{},{}",
                r.scenario,
                r.method,
                bins.join(","),
                r.detections,
                r.replications
            )?;
        }
        Ok(())
    }

    /// Header `scenario,method,replication,data_seed,run_seed,truth,estimate,reject,error`.
    /// Lists are `;`-separated.
    pub fn write_log<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "scenario,method,replication,data_seed,run_seed,truth,estimate,reject,error"
        )?;
        let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(";");
        for r in &self.log {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                r.scenario,
                r.method,
                r.replication,
                r.data_seed,
                r.run_seed,
                join(&r.truth),
                join(&r.estimate),
                r.reject,
                r.error.map(|e| e.to_string()).unwrap_or_default()
            )?;
        }
        Ok(())
    }
}

fn label_tag(label: &str) -> u64 {
    label
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325, |h, b| mix64(h ^ u64::from(b)))
}

fn localization_error(truth: &[usize], estimate: &[usize]) -> Option<usize> {
    if estimate.is_empty() {
        return None;
    }
    if truth.is_empty() {
        return Some(usize::MAX);
    }
    truth
        .iter()
        .map(|&t| estimate.iter().map(|&e| e.abs_diff(t)).min().unwrap())
        .max()
}

/// Seed of the data in replication `r` of a scenario. The run seed is derived
/// from it, so every method sees the same data.
pub fn replication_seeds(master_seed: u64, scenario_label: &str, r: usize) -> (u64, u64) {
    let data = derive_seed(derive_seed(master_seed, label_tag(scenario_label)), r as u64);
    (data, derive_seed(data, stream::REPLICATION))
}

/// Run every method on `replications` seeded draws of every scenario. The
/// `seed` field of each scenario spec is ignored in favour of `master_seed`.
pub fn run_experiment(
    scenarios: &[ScenarioSpec],
    methods: &[Method],
    replications: usize,
    master_seed: u64,
    cache: &CutoffCache,
) -> Result<ExperimentResult> {
    let jobs: Vec<(usize, usize)> = (0..scenarios.len())
        .flat_map(|s| (0..replications).map(move |r| (s, r)))
        .collect();
    let per_job: Vec<Vec<Replication>> = jobs
        .par_iter()
        .map(|&(s, r)| {
            let label = scenarios[s].label();
            let (data_seed, run_seed) = replication_seeds(master_seed, &label, r);
            let spec = ScenarioSpec {
                seed: data_seed,
                ..scenarios[s].clone()
            };
            let generated = build_scenario(&spec)?;
            methods
                .iter()
                .map(|m| {
                    let config = DetectorConfig {
                        seed: run_seed,
                        ..m.config.clone()
                    };
                    let report = detect(&generated.data, &config, cache)?;
                    let reject = match config.mode {
                        Mode::Single => report.nodes.first().is_some_and(|n| n.reject),
                        Mode::Multi => !report.changepoints.is_empty(),
                    };
                    Ok(Replication {
                        scenario: label.clone(),
                        method: m.name.clone(),
                        replication: r,
                        data_seed,
                        run_seed,
                        error: localization_error(&generated.truth, &report.changepoints),
                        truth: generated.truth.clone(),
                        estimate: report.changepoints,
                        reject,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut log: Vec<Replication> = per_job.into_iter().flatten().collect();
    log.sort_by(|a, b| {
        (
            scenario_pos(scenarios, &a.scenario),
            method_pos(methods, &a.method),
            a.replication,
        )
            .cmp(&(
                scenario_pos(scenarios, &b.scenario),
                method_pos(methods, &b.method),
                b.replication,
            ))
    });
    let mut rows = Vec::new();
    for sc in scenarios {
        let label = sc.label();
        for m in methods {
            let mut row = SummaryRow {
                scenario: label.clone(),
                method: m.name.clone(),
                bins: [0; BINS],
                detections: 0,
                replications,
            };
            for rep in log.iter().filter(|r| r.scenario == label && r.method == m.name) {
                if let Some(e) = rep.error {
                    row.bins[e.min(BINS - 1)] += 1;
                    row.detections += 1;
                }
            }
            rows.push(row);
        }
    }
    Ok(ExperimentResult { rows, log })
}

fn scenario_pos(s: &[ScenarioSpec], label: &str) -> usize {
    s.iter().position(|x| x.label() == label).unwrap_or(usize::MAX)
}

fn method_pos(m: &[Method], name: &str) -> usize {
    m.iter().position(|x| x.name == name).unwrap_or(usize::MAX)
}
