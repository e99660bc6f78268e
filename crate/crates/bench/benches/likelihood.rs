use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sevlogit_bench::mixed_fixture;
use sevlogit_core::estimate::{estimate, EstimationOptions};
use sevlogit_core::halton::build_draws;
use sevlogit_core::likelihood::{log_likelihood_and_score, mnl_probabilities};
use sevlogit_core::CompiledModel;

fn likelihood_and_score(c: &mut Criterion) {
    let mut group = c.benchmark_group("ll_and_score");
    group.sample_size(10);
    for n in [1_000usize, 5_000] {
        let (config, ds) = mixed_fixture(n);
        let model = CompiledModel::for_dataset(&config.spec, &ds).unwrap();
        let draws = build_draws(ds.len(), 500, 2, 100).unwrap();
        let theta = config.theta_true.0.clone();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| log_likelihood_and_score(&model, black_box(&theta), &ds, &draws).unwrap())
        });
    }
    group.finish();
}

fn logit_probabilities(c: &mut Criterion) {
    let v = [0.3, -1.2, 0.0];
    c.bench_function("mnl_probabilities", |b| b.iter(|| mnl_probabilities(black_box(&v))));
}

fn full_estimation(c: &mut Criterion) {
    let (config, ds) = mixed_fixture(2_000);
    let options = EstimationOptions { n_draws: 100, ..EstimationOptions::default() };
    let mut group = c.benchmark_group("estimate");
    group.sample_size(10);
    group.bench_function("mixed_2000x100", |b| b.iter(|| estimate(&config.spec, &ds, &options).unwrap()));
    group.finish();
}

criterion_group!(benches, likelihood_and_score, logit_probabilities, full_estimation);
criterion_main!(benches);
