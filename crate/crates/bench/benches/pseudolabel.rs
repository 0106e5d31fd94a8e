use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use good_core::pseudolabel::{build_pool, merge_sources, pseudo_label_source};

fn bench_pipeline(c: &mut Criterion) {
    let (ds, split, spec) = good_bench::corpus(3, 2000);
    let (train, sources) = good_bench::training_proposals(&ds, &split, &spec);

    let mut group = c.benchmark_group("pseudo_label_source");
    for k in [1, 3] {
        group.bench_with_input(BenchmarkId::from_parameter(k), &k, |b, &k| {
            b.iter(|| pseudo_label_source(&sources[0].1, &train.annotations, k, 0.5))
        });
    }
    group.finish();

    let labeled: Vec<_> = sources
        .iter()
        .map(|(tag, props)| (tag.clone(), pseudo_label_source(props, &train.annotations, 3, 0.5)))
        .collect();
    c.bench_function("merge_sources", |b| b.iter(|| merge_sources(&labeled, 0.5)));
    let merged = merge_sources(&labeled, 0.5);
    c.bench_function("build_pool", |b| b.iter(|| build_pool(&train, &merged, 0.5).unwrap()));
}

criterion_group!(benches, bench_pipeline);
criterion_main!(benches);
