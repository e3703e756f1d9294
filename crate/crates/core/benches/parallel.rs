use std::f64::consts::PI;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pcrx::channel::{taps, ChannelGeometry};
use pcrx::link::{ber_monte_carlo_with, LinkConfig};
use pcrx::montecarlo::{simulate_with, SimConfig};
use pcrx::Execution;

fn modes() -> Vec<(&'static str, Execution)> {
    let mut m = vec![("sequential", Execution::Sequential)];
    if Execution::parallel_available() {
        m.push(("parallel", Execution::Parallel));
    }
    m
}

fn bench_simulate(c: &mut Criterion) {
    let g = ChannelGeometry::new(10.0, 5.0, 80.0).unwrap();
    let cfg = SimConfig::new(g, 1e-3, 1.0, 2_000, 1).unwrap();
    let mut group = c.benchmark_group("simulate");
    group.sample_size(10);
    for (name, exec) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| black_box(simulate_with(&cfg, exec).unwrap().len()))
        });
    }
    group.finish();
}

fn bench_ber(c: &mut Criterion) {
    let g = ChannelGeometry::new(10.0, 5.0, 80.0).unwrap();
    let cfg = LinkConfig::new(taps(&g, PI / 4.0, 0.15, 100).unwrap(), 300, 0, 10, 200_000, 1).unwrap();
    let mut group = c.benchmark_group("ber");
    group.sample_size(10);
    for (name, exec) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| black_box(ber_monte_carlo_with(&cfg, exec).unwrap().errors))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_simulate, bench_ber);
criterion_main!(benches);
