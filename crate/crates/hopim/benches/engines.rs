//! Compares the tree engine against the inductive oracle, the serial batch
//! lane against the parallel one, and normalization cost across sizes.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use hopim::batch::{run_parallel, run_serial, Engine};
use hopim::bisim::Session;
use hopim::corpus::{annotate_closed, bench_pair, bisimilar_pair, TermGen};
use hopim::normalizer::{nf_equal, TreeStore};
use hopim::Term;

fn law_pairs(count: u64, budget: usize) -> Vec<(Term, Term)> {
    (0..count)
        .map(|i| {
            let mut gen = TermGen::new(i);
            let (l, r, _) = bisimilar_pair(&mut gen, budget);
            (annotate_closed(&l).unwrap(), annotate_closed(&r).unwrap())
        })
        .collect()
}

fn engines(c: &mut Criterion) {
    let pairs = law_pairs(64, 6);
    let mut group = c.benchmark_group("engine");
    group.bench_function("tree", |b| {
        b.iter(|| {
            let mut store = TreeStore::new();
            pairs
                .iter()
                .filter(|(l, r)| nf_equal(&mut store, l, r).unwrap().equal)
                .count()
        })
    });
    group.bench_function("oracle", |b| {
        b.iter(|| {
            let mut session = Session::new();
            pairs
                .iter()
                .filter(|(l, r)| session.check(l, r).unwrap())
                .count()
        })
    });
    group.finish();
}

fn batch_lanes(c: &mut Criterion) {
    let pairs = law_pairs(256, 6);
    let mut group = c.benchmark_group("batch");
    group.bench_function("serial", |b| b.iter(|| run_serial(&pairs, Engine::Fast)));
    group.bench_function("parallel", |b| b.iter(|| run_parallel(&pairs, Engine::Fast)));
    group.finish();
}

fn scaling(c: &mut Criterion) {
    let mut group = c.benchmark_group("normalize");
    group.sample_size(10);
    for n in [1_000usize, 10_000, 100_000] {
        let (l, r) = bench_pair(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| {
                let mut store = TreeStore::new();
                nf_equal(&mut store, &l, &r).unwrap().equal
            })
        });
    }
    group.finish();
}

criterion_group!(benches, engines, batch_lanes, scaling);
criterion_main!(benches);
