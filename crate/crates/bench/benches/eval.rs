use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use good_core::eval::{evaluate, EvalConfig};

fn bench_evaluate(c: &mut Criterion) {
    let mut group = c.benchmark_group("evaluate");
    group.sample_size(10);
    for n in [500, 5000] {
        let (ds, split, _) = good_bench::corpus(1, n);
        let dets = good_bench::detections(&ds, 1);
        let cfg = EvalConfig::default();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| evaluate(&dets, &ds, &split, &cfg, "bench").unwrap())
        });
    }
    group.finish();
}

fn bench_budget(c: &mut Criterion) {
    let (ds, split, _) = good_bench::corpus(2, 1000);
    let dets = good_bench::detections(&ds, 2);
    let mut group = c.benchmark_group("ar_novel_budget");
    for budget in [20, 100] {
        let cfg = EvalConfig::with_budget(budget);
        group.bench_with_input(BenchmarkId::from_parameter(budget), &budget, |b, _| {
            b.iter(|| good_core::eval::ar_novel(&dets, &ds, &split, &cfg))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_evaluate, bench_budget);
criterion_main!(benches);
