// SPDX-License-Identifier: MIT OR Apache-2.0

//! Fixtures shared by the benchmarks.

use hdcpd_core::datagen::{build_scenario, Scenario, ScenarioSpec};
use hdcpd_core::DataSequence;

/// One seeded draw of `scenario` in dimension `d`.
pub fn fixture(scenario: Scenario, d: usize) -> DataSequence {
    build_scenario(&ScenarioSpec::new(scenario, 1).with_d(d))
        .expect("scenario builds")
        .data
}
