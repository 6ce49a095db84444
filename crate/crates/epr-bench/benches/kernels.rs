//! Hot-path benchmarks: trajectory sampling, the two ground-state solver
//! paths, the balance-equation root finder, and first-exit sampling.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion, Throughput};
use epr_core::rng::stream_rng;
use epr_core::{
    ground_state_with, random_potential_model, sample_first_exit, sample_trajectory, solve_e1f,
    two_level_rpm, JumpMode, KineticSpec, RpmSpec, SolverPath,
};

fn trajectories(c: &mut Criterion) {
    let h = random_potential_model(
        64,
        &[0.0, 1.0],
        &[0.3, 0.7],
        KineticSpec::Hypercube { gamma: 0.8 },
        7,
    )
    .unwrap();
    let mut group = c.benchmark_group("trajectory");
    group.throughput(Throughput::Elements(1));
    for t in [2.0, 8.0] {
        group.bench_function(format!("hypercube-N6/t={t}"), |b| {
            let mut i = 0u64;
            b.iter_batched(
                || {
                    i += 1;
                    stream_rng(1, i)
                },
                |mut rng| sample_trajectory(&h, 0, t, JumpMode::LinkRate, &mut rng),
                BatchSize::SmallInput,
            )
        });
    }
    group.finish();
}

fn ground_states(c: &mut Criterion) {
    let mut group = c.benchmark_group("ground-state");
    group.sample_size(10);

    let (dense, _) = two_level_rpm(9, 0.8, 0.0, 1.0, None).unwrap();
    group.bench_function("dense/M=512", |b| {
        b.iter(|| ground_state_with(&dense, None, None, SolverPath::Dense).unwrap())
    });

    let (sparse, _) = two_level_rpm(13, 0.8, 0.0, 1.0, None).unwrap();
    group.bench_function("lanczos/M=8192", |b| {
        b.iter(|| ground_state_with(&sparse, None, None, SolverPath::Iterative).unwrap())
    });
    group.finish();
}

fn balance_roots(c: &mut Criterion) {
    let spec = RpmSpec::new(vec![-0.8, -0.1, 0.4, 1.3], vec![0.1, 0.2, 0.3, 0.4], -0.9).unwrap();
    c.bench_function("balance-root/4-level", |b| b.iter(|| solve_e1f(&spec)));
}

fn first_exits(c: &mut Criterion) {
    let (h, part) = two_level_rpm(6, 0.6, 0.0, 1.0, Some(&[0, 1, 2, 4])).unwrap();
    let mut group = c.benchmark_group("first-exit");
    group.throughput(Throughput::Elements(1));
    group.bench_function("4-state-cavity", |b| {
        let mut i = 0u64;
        b.iter_batched(
            || {
                i += 1;
                stream_rng(2, i)
            },
            |mut rng| sample_first_exit(&h, &part, 0, 50.0, &mut rng).unwrap(),
            BatchSize::SmallInput,
        )
    });
    group.finish();
}

criterion_group!(benches, trajectories, ground_states, balance_roots, first_exits);
criterion_main!(benches);
