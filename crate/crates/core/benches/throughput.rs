//! Parallel vs sequential throughput.
//!
//! The batch groups pit a plain sequential loop against a rayon loop over the
//! same public entry points within one run. The single-operation benches keep
//! feature-independent names, so running `cargo bench` once with default
//! features and once with `--no-default-features` lets criterion report the
//! internal speedup of the `parallel` feature directly.

use std::time::Duration;

use criterion::{criterion_group, criterion_main, Criterion};
use rayon::prelude::*;

use coprint_core::coprime::{derive_keys, extract_features, generate_template, KeySet};
use coprint_core::fpdata::DatasetEntry;
use coprint_core::matcher::{match_features, MatchParams};
use coprint_core::ridgefeat::{build_feature_matrix, FeatureMatrix};
use coprint_core::sectoring::SectorConfig;
use coprint_core::synthgen::{generate_population, SceneParams};

struct Fixture {
    entries: Vec<DatasetEntry>,
    features: Vec<FeatureMatrix>,
    keys: KeySet,
    config: SectorConfig,
    params: MatchParams,
}

fn fixture() -> Fixture {
    let params = SceneParams::default();
    let entries = generate_population(8, 2, 0.8, 99, &params).unwrap();
    let config = SectorConfig::default();
    let features: Vec<FeatureMatrix> = entries
        .iter()
        .map(|e| build_feature_matrix(&e.record, e.skeleton.as_ref().unwrap(), &config).unwrap())
        .collect();
    let side = features[0].scalar_len() as u32;
    Fixture {
        entries,
        features,
        keys: derive_keys(3, side).unwrap(),
        config,
        params: MatchParams::default(),
    }
}

fn single_ops(c: &mut Criterion) {
    let f = fixture();
    c.bench_function("feature_matrix", |b| {
        let e = &f.entries[0];
        b.iter(|| build_feature_matrix(&e.record, e.skeleton.as_ref().unwrap(), &f.config).unwrap())
    });
    c.bench_function("template_generate", |b| {
        b.iter(|| generate_template(&f.features[0], &f.keys).unwrap())
    });
    let tpl = generate_template(&f.features[0], &f.keys).unwrap();
    c.bench_function("template_extract", |b| {
        b.iter(|| extract_features(&tpl, &f.keys).unwrap())
    });
    c.bench_function("match_pair", |b| {
        b.iter(|| match_features(&f.features[0], &f.features[1], &f.params).unwrap())
    });
}

fn batch_groups(c: &mut Criterion) {
    let f = fixture();

    let mut group = c.benchmark_group("batch_feature_extraction");
    group
        .sample_size(20)
        .measurement_time(Duration::from_secs(3));
    group.bench_function("sequential", |b| {
        b.iter(|| -> Vec<FeatureMatrix> {
            f.entries
                .iter()
                .map(|e| {
                    build_feature_matrix(&e.record, e.skeleton.as_ref().unwrap(), &f.config)
                        .unwrap()
                })
                .collect()
        })
    });
    group.bench_function("parallel", |b| {
        b.iter(|| -> Vec<FeatureMatrix> {
            f.entries
                .par_iter()
                .map(|e| {
                    build_feature_matrix(&e.record, e.skeleton.as_ref().unwrap(), &f.config)
                        .unwrap()
                })
                .collect()
        })
    });
    group.finish();

    let mut group = c.benchmark_group("batch_template_generation");
    group
        .sample_size(20)
        .measurement_time(Duration::from_secs(3));
    group.bench_function("sequential", |b| {
        b.iter(|| -> Vec<_> {
            f.features
                .iter()
                .map(|m| generate_template(m, &f.keys).unwrap())
                .collect()
        })
    });
    group.bench_function("parallel", |b| {
        b.iter(|| -> Vec<_> {
            f.features
                .par_iter()
                .map(|m| generate_template(m, &f.keys).unwrap())
                .collect()
        })
    });
    group.finish();

    let pairs: Vec<(usize, usize)> = (0..f.features.len())
        .flat_map(|i| ((i + 1)..f.features.len()).map(move |j| (i, j)))
        .collect();
    let mut group = c.benchmark_group("batch_matching");
    group
        .sample_size(20)
        .measurement_time(Duration::from_secs(3));
    group.bench_function("sequential", |b| {
        b.iter(|| -> Vec<f64> {
            pairs
                .iter()
                .map(|&(i, j)| {
                    match_features(&f.features[i], &f.features[j], &f.params)
                        .unwrap()
                        .overall_score
                })
                .collect()
        })
    });
    group.bench_function("parallel", |b| {
        b.iter(|| -> Vec<f64> {
            pairs
                .par_iter()
                .map(|&(i, j)| {
                    match_features(&f.features[i], &f.features[j], &f.params)
                        .unwrap()
                        .overall_score
                })
                .collect()
        })
    });
    group.finish();
}

criterion_group!(benches, single_ops, batch_groups);
criterion_main!(benches);
