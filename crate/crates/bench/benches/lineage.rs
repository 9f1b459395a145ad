use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use smoke_bench::grouped_zipf;

fn backward(c: &mut Criterion) {
    let (s, r) = grouped_zipf(1_000_000, 5000);
    let mut g = c.benchmark_group("backward");
    g.sample_size(20);
    // Group 0 is the most frequent zipf value; the last is among the rarest.
    for o in [0u32, r.row_count() as u32 - 1] {
        g.bench_with_input(BenchmarkId::new("index", o), &o, |b, &o| {
            b.iter(|| s.backward("base", &[o], "zipf").expect("backward"))
        });
        g.bench_with_input(BenchmarkId::new("lazy", o), &o, |b, &o| {
            b.iter(|| s.lazy_backward("base", &[o], "zipf").expect("lazy"))
        });
    }
    g.finish();
}

fn forward(c: &mut Criterion) {
    let (s, _) = grouped_zipf(1_000_000, 5000);
    let ins: Vec<u32> = (0..1000).map(|i| i * 997).collect();
    c.bench_function("forward/1000_rows", |b| b.iter(|| s.forward("base", &ins, "zipf").expect("forward")));
}

criterion_group!(benches, backward, forward);
criterion_main!(benches);
