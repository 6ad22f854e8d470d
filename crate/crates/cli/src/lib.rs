// SPDX-License-Identifier: MIT OR Apache-2.0

//! The `hdcpd` command-line tool.
//!
//! Exit status is 0 on success (whether or not a change is found), 1 on
//! runtime errors and 2 on usage errors.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use clap::Parser;

use hdcpd_core::datagen::{build_scenario, Scenario, ScenarioSpec};
use hdcpd_core::experiment::{run_experiment, Method};
use hdcpd_core::multicp::pmin_scan;
use hdcpd_core::pipeline::{detect, Mode};
use hdcpd_core::singlecp::minimize_statistic;
use hdcpd_core::{CutoffCache, DetectorConfig, Labeling, Preset, SplitStatistic};

pub mod args;
pub mod ingest;

use args::{split_statistic, Cli, Command, DetectorArgs, ExperimentArgs, GenerateArgs, RunArgs, ScenarioArgs};
pub use ingest::{ingest_csv, parse_csv, IngestError};

/// Parse `argv` and run; returns the process exit status.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let outcome = match cli.command {
        Some(Command::Experiment(a)) => experiment(&a),
        Some(Command::Generate(a)) => generate(&a),
        None => run(&cli.run),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

/// Method label in the `GI0` / `RI1` / `GI1-block` style.
pub fn method_name(preset: Preset, statistic: SplitStatistic) -> String {
    let stat = match statistic {
        SplitStatistic::Rand => "RI",
        SplitStatistic::Impurity(_) => "GI",
    };
    match preset {
        Preset::Delta0 => format!("{stat}0"),
        Preset::Delta1 => format!("{stat}1"),
        Preset::Delta1Block => format!("{stat}1-block"),
        Preset::Euclidean => format!("{stat}-euclidean"),
    }
}

fn detector_config(a: &DetectorArgs, preset: Preset, statistic: SplitStatistic) -> DetectorConfig {
    let mut c = DetectorConfig::method(preset, statistic);
    c.mode = a.mode.into();
    c.impurity = a.impurity.into();
    c.alpha = a.alpha;
    c.min_gap = a.min_gap as usize;
    c.null.permutations = a.permutations as usize;
    c.pmin_permutations = a.pmin_permutations as usize;
    c.cluster.restarts = a.restarts as usize;
    c.seed = a.seed;
    c.outlier_filter = a.outlier_filter;
    c
}

fn cache(a: &DetectorArgs) -> Result<CutoffCache> {
    Ok(match &a.cache_dir {
        Some(dir) => CutoffCache::with_dir(dir).with_context(|| format!("cache directory {}", dir.display()))?,
        None => CutoffCache::in_memory(),
    })
}

fn scenario_spec(scenario: Scenario, seed: u64, s: &ScenarioArgs) -> ScenarioSpec {
    ScenarioSpec {
        n: s.n,
        tau: s.tau,
        segment_len: s.segment_len,
        d: s.d,
        ..ScenarioSpec::new(scenario, seed)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

/// Run `write` against `path`, or stdout when there is none.
fn emit(path: Option<&Path>, write: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let mut w = create(p)?;
            write(&mut w).and_then(|()| w.flush())
        }
        None => {
            let mut w = io::stdout().lock();
            write(&mut w).and_then(|()| w.flush())
        }
    }
    .with_context(|| match path {
        Some(p) => format!("cannot write {}", p.display()),
        None => "cannot write to stdout".to_string(),
    })
}

fn run(a: &RunArgs) -> Result<()> {
    let statistic = split_statistic(a.statistic, a.detector.impurity);
    let mut config = detector_config(&a.detector, a.dissimilarity.into(), statistic);
    config.standardized = a.standardize;
    let (mut data, input) = match (&a.input, a.scenario) {
        (Some(path), _) => {
            let data = ingest_csv(path).with_context(|| format!("reading {}", path.display()))?;
            (data, format!("csv:{} (rows are time points)", path.display()))
        }
        (None, Some(sc)) => {
            let spec = scenario_spec(sc, a.data_seed.unwrap_or(a.detector.seed), &a.sizes);
            let g = build_scenario(&spec)?;
            let truth: Vec<String> = g.truth.iter().map(usize::to_string).collect();
            let input = format!("scenario:{} seed={} truth={}", spec.label(), spec.seed, truth.join(";"));
            (g.data, input)
        }
        (None, None) => unreachable!("clap requires --input or --scenario"),
    };
    if a.standardize {
        data = data.standardized();
    }
    let cache = cache(&a.detector)?;
    let mut report = detect(&data, &config, &cache)?;
    report.metadata.input = Some(input);

    emit(a.report.as_deref(), |w| writeln!(w, "{}", report.to_json()))?;
    eprintln!("change-points: {:?}", report.changepoints);

    let root = Labeling::parse(&report.nodes[0].labels)?;
    if let Some(path) = &a.trace {
        if config.mode != Mode::Single {
            eprintln!("warning: --trace applies to single mode; skipped");
        } else if root.is_constant() {
            eprintln!("warning: constant clustering, no trace written");
        } else {
            let trace = minimize_statistic(&root, statistic)?;
            emit(Some(path), |w| trace.write_csv(w))?;
        }
    }
    if let Some(path) = &a.grid {
        if config.mode != Mode::Multi {
            eprintln!("warning: --grid applies to multi mode; skipped");
        } else {
            let grid = pmin_scan(&root, config.min_gap, config.impurity)?;
            emit(Some(path), |w| grid.write_csv(w))?;
        }
    }
    Ok(())
}

fn experiment(a: &ExperimentArgs) -> Result<()> {
    let specs: Vec<ScenarioSpec> = a.scenarios.iter().map(|&s| scenario_spec(s, 0, &a.sizes)).collect();
    let mut methods = Vec::new();
    for &p in &a.dissimilarity {
        for &s in &a.statistic {
            let statistic = split_statistic(s, a.detector.impurity);
            let preset = p.into();
            methods.push(Method::new(
                method_name(preset, statistic),
                detector_config(&a.detector, preset, statistic),
            ));
        }
    }
    let cache = cache(&a.detector)?;
    let result = run_experiment(&specs, &methods, a.replications as usize, a.detector.seed, &cache)?;
    emit(a.table.as_deref(), |w| result.write_table(w))?;
    if let Some(path) = &a.log {
        emit(Some(path), |w| result.write_log(w))?;
    }
    Ok(())
}

fn generate(a: &GenerateArgs) -> Result<()> {
    let spec = scenario_spec(a.scenario, a.seed, &a.sizes);
    let g = build_scenario(&spec)?;
    emit(Some(&a.output), |w| {
        let header: Vec<String> = (1..=g.data.d()).map(|q| format!("x{q}")).collect();
        writeln!(w, "{}", header.join(","))?;
        for row in g.data.rows() {
            let fields: Vec<String> = row.iter().map(f64::to_string).collect();
            writeln!(w, "{}", fields.join(","))?;
        }
        Ok(())
    })?;
    let mut sidecar = a.output.clone().into_os_string();
    sidecar.push(".json");
    let meta = serde_json::json!({
        "scenario": spec.scenario.id(),
        "label": spec.label(),
        "spec": spec,
        "n": g.data.n(),
        "d": g.data.d(),
        "truth": g.truth,
        "version": env!("CARGO_PKG_VERSION"),
    });
    let path = std::path::PathBuf::from(sidecar);
    emit(Some(&path), |w| {
        writeln!(w, "{}", serde_json::to_string_pretty(&meta).expect("json"))
    })?;
    Ok(())
}
