// SPDX-License-Identifier: MIT OR Apache-2.0

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use hdcpd_bench::fixture;
use hdcpd_core::datagen::Scenario;
use hdcpd_core::dissim::dissimilarity_matrix;
use hdcpd_core::multicp::pmin_scan;
use hdcpd_core::nulldist::{monte_carlo_null, DEFAULT_NULL_SEED};
use hdcpd_core::pipeline::detect;
use hdcpd_core::{
    two_means, ClusterConfig, CutoffCache, DetectorConfig, DissimilaritySpec, ImpurityKind, Labeling, Statistic,
};

fn dissimilarities(c: &mut Criterion) {
    let mut g = c.benchmark_group("dissimilarity");
    for d in [100, 1000] {
        let data = fixture(Scenario::A, d);
        for (name, spec) in [
            ("delta0", DissimilaritySpec::delta0()),
            ("delta1", DissimilaritySpec::delta1()),
        ] {
            g.bench_with_input(BenchmarkId::new(name, d), &data, |b, data| {
                b.iter(|| dissimilarity_matrix(black_box(data), &spec).unwrap())
            });
        }
    }
    g.finish();
}

fn clustering(c: &mut Criterion) {
    let m = dissimilarity_matrix(&fixture(Scenario::B, 200), &DissimilaritySpec::delta0()).unwrap();
    c.bench_function("two_means/n40", |b| {
        b.iter(|| two_means(black_box(&m), &ClusterConfig::default()).unwrap())
    });
}

fn null_laws(c: &mut Criterion) {
    let stat = Statistic::ImpurityMin {
        impurity: ImpurityKind::Gini,
    };
    c.bench_function("monte_carlo_null/20x20/10000", |b| {
        b.iter(|| monte_carlo_null(stat, 20, 20, 10_000, DEFAULT_NULL_SEED).unwrap())
    });
}

fn pmin(c: &mut Criterion) {
    let labels: Vec<u8> = (0..60).map(|i| ((i / 15) % 2) as u8).collect();
    let labels = Labeling::new(labels).unwrap();
    c.bench_function("pmin_scan/n60", |b| {
        b.iter(|| pmin_scan(black_box(&labels), 5, ImpurityKind::Gini).unwrap())
    });
}

fn end_to_end(c: &mut Criterion) {
    let data = fixture(Scenario::A, 500);
    let cache = CutoffCache::in_memory();
    let config = DetectorConfig::default();
    detect(&data, &config, &cache).unwrap();
    c.bench_function("detect/single/warm_cache", |b| {
        b.iter(|| detect(black_box(&data), &config, &cache).unwrap())
    });
}

criterion_group!(benches, dissimilarities, clustering, null_laws, pmin, end_to_end);
criterion_main!(benches);
