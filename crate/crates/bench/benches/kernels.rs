use std::hint::black_box;

use cheaptalk::equilibria::{enumerate_pure_connected_pbe, worst_case_bound, BoundSearch};
use cheaptalk::harness::Simulation;
use cheaptalk::Bias;
use cheaptalk_bench::config;
use criterion::{criterion_group, criterion_main, BatchSize, Criterion, Throughput};

const STEPS: u64 = 100_000;

fn simulation(c: &mut Criterion) {
    let mut g = c.benchmark_group("simulation");
    g.throughput(Throughput::Elements(STEPS));
    for (k, b) in [(5, 0.0), (21, 0.0), (21, 0.1)] {
        let cfg = config(k, b);
        g.bench_function(format!("k{k}_b{b}"), |bench| {
            bench.iter_batched(
                || Simulation::new(&cfg, 1).unwrap(),
                |mut sim| {
                    for _ in 0..STEPS {
                        sim.step();
                    }
                    black_box(sim.steps_taken())
                },
                BatchSize::LargeInput,
            )
        });
    }
    g.finish();
}

fn bound(c: &mut Criterion) {
    c.bench_function("bound_k201", |b| b.iter(|| worst_case_bound(black_box(201), BoundSearch::Symmetric).unwrap()));
    c.bench_function("bound_k21_exhaustive", |b| b.iter(|| worst_case_bound(black_box(21), BoundSearch::Exhaustive).unwrap()));
}

fn enumeration(c: &mut Criterion) {
    let bias = Bias::new(0.1).unwrap();
    c.bench_function("pbe_k21", |b| b.iter(|| enumerate_pure_connected_pbe(black_box(21), bias, 1e-3).unwrap()));
}

criterion_group!(benches, simulation, bound, enumeration);
criterion_main!(benches);
