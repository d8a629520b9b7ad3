use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use drmdp_core::drmdp::random::{random_spec, RandomSpecConfig};
use drmdp_core::drmdp::PolicyS;
use drmdp_core::tabular::{bellman_sweep, solve_fixed_point, KeyGraph, TrajectoryQTable, DEFAULT_MAX_SWEEPS};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn sweeps(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let spec = random_spec(&mut rng, &RandomSpecConfig { layered: false, size: 6, overlap: 1, ..Default::default() });
    let policy = PolicyS::uniform(&spec);
    let graph = KeyGraph::build(&spec).unwrap();
    let table = TrajectoryQTable::zeros(&graph);
    c.bench_function("bellman_sweep cyclic 6 states c=1", |b| {
        b.iter(|| bellman_sweep(black_box(&table), &table, &policy).unwrap())
    });
    c.bench_function("solve_fixed_point cyclic 6 states c=1", |b| {
        b.iter(|| solve_fixed_point(black_box(&graph), &policy, 1e-10, DEFAULT_MAX_SWEEPS).unwrap())
    });
    c.bench_function("key graph build", |b| b.iter(|| KeyGraph::build(black_box(&spec)).unwrap()));
}

criterion_group!(benches, sweeps);
criterion_main!(benches);
