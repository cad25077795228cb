//! Replica throughput on the rayon pool against the sequential fallback.

use std::hint::black_box;

use boundary_kpz::growth::{self, GrowthConfig};
use boundary_kpz::stochastics::{self, Dissipation};
use boundary_kpz::{parallel, rng, Domain, ModeCutoff};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

const REPLICAS: usize = 16;

fn growth_replicas(c: &mut Criterion) {
    let d = Domain::from_preset(&"disk".parse().unwrap(), 32).unwrap();
    let cfg = GrowthConfig {
        eps: 0.4,
        horizon: 0.05,
        mesh: 1,
        ..Default::default()
    };
    let kernel = cfg.kernel.build(&d).unwrap();
    let one = |r: usize| growth::run_growth(&cfg, &d, &kernel, rng::replica_seed(7, r as u64)).unwrap();

    let mut g = c.benchmark_group("growth_replicas");
    g.sample_size(10);
    g.bench_function(BenchmarkId::new("parallel", REPLICAS), |b| {
        b.iter(|| black_box(parallel::map_indices(REPLICAS, one)))
    });
    g.bench_function(BenchmarkId::new("sequential", REPLICAS), |b| {
        b.iter(|| black_box(parallel::sequential::map_indices(REPLICAS, one)))
    });
    g.finish();
}

fn ou_replicas(c: &mut Criterion) {
    let d = Domain::from_preset(&"disk".parse().unwrap(), 64).unwrap();
    let one = |r: usize| {
        let mut e = stochastics::sample_stationary(&d.basis, ModeCutoff(16), r as u64)
            .unwrap()
            .with_dissipation(Dissipation::HalfSquare);
        for _ in 0..200 {
            e.ou_step(0.01).unwrap();
        }
        e.coefficients()[0]
    };

    let mut g = c.benchmark_group("ou_replicas");
    g.bench_function(BenchmarkId::new("parallel", 256), |b| {
        b.iter(|| black_box(parallel::map_indices(256, one)))
    });
    g.bench_function(BenchmarkId::new("sequential", 256), |b| {
        b.iter(|| black_box(parallel::sequential::map_indices(256, one)))
    });
    g.finish();
}

criterion_group!(benches, growth_replicas, ou_replicas);
criterion_main!(benches);
