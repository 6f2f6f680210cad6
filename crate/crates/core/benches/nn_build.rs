//! Exact neighbour-graph construction and a full dgaec-inc solve, pinned to
//! one worker versus the rayon pool. Building without the
//! `parallel` feature runs both variants sequentially.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dense_multicut::par::{current_threads, with_threads};
use dense_multicut::synth::synth_instance;
use dense_multicut::{solve, Algorithm, AlphaSign, FeatureMatrix, NnGraph, NodeStore, SolverConfig};

fn instance(n: usize) -> FeatureMatrix {
    let (fm, _) = synth_instance(n, 64, 50, 0.1, 0).unwrap();
    fm.with_uniform_alpha(0.4, AlphaSign::Minus).unwrap()
}

/// One worker, then the rayon path with at least two workers so it is
/// exercised even on a single core.
fn thread_settings() -> [(&'static str, usize); 2] {
    [("sequential", 1), ("parallel", current_threads().max(2))]
}

fn graph_build(c: &mut Criterion) {
    let mut group = c.benchmark_group("nn_graph_build");
    group.sample_size(10);
    for n in [1000, 4000] {
        let store = NodeStore::new(&instance(n));
        for (name, threads) in thread_settings() {
            group.bench_with_input(BenchmarkId::new(name, n), &store, |b, store| {
                b.iter(|| with_threads(threads, || black_box(NnGraph::build(store, 5).unwrap())))
            });
        }
    }
    group.finish();
}

fn full_solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("dgaec_inc_solve");
    group.sample_size(10);
    let fm = instance(2000);
    for (name, threads) in thread_settings() {
        let cfg = SolverConfig::new(Algorithm::DenseGaecInc).with_threads(threads);
        group.bench_function(name, |b| b.iter(|| black_box(solve(&fm, &cfg).unwrap())));
    }
    group.finish();
}

criterion_group!(benches, graph_build, full_solve);
criterion_main!(benches);
