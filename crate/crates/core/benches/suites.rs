use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use orthoseries::{construct, par, suites};

fn run(id: &str, instances: usize) -> bool {
    let s = suites::all_suites().into_iter().find(|s| s.id == id).expect("suite");
    suites::run_suite(&s, 0, instances).passed
}

fn bench_suites(c: &mut Criterion) {
    let mut g = c.benchmark_group("suites");
    g.sample_size(10);
    for id in ["oracle", "atom-maxima", "slice-bounds"] {
        g.bench_with_input(BenchmarkId::new("sequential", id), id, |b, id| {
            b.iter(|| par::with_jobs(Some(1), || black_box(run(id, 32))))
        });
        g.bench_with_input(BenchmarkId::new("parallel", id), id, |b, id| {
            b.iter(|| par::with_jobs(None, || black_box(run(id, 32))))
        });
    }
    g.finish();
}

fn bench_family(c: &mut Criterion) {
    let mut g = c.benchmark_group("family_identities");
    g.sample_size(10);
    g.bench_function("sequential k=4", |b| {
        b.iter(|| par::with_jobs(Some(1), || black_box(construct::family_check(4).unwrap().ok)))
    });
    g.bench_function("parallel k=4", |b| {
        b.iter(|| par::with_jobs(None, || black_box(construct::family_check(4).unwrap().ok)))
    });
    g.finish();
}

criterion_group!(benches, bench_suites, bench_family);
criterion_main!(benches);
