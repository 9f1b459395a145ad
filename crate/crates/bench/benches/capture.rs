use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use smoke_core::bench::micro::{Micro, MicroKind, MicroParams, Variant};
use smoke_core::operators::CaptureMode;
use smoke_bench::SEED;

fn variants() -> Vec<Variant> {
    let mut v: Vec<Variant> = CaptureMode::ALL.iter().map(|&mode| Variant { mode, exact: false }).collect();
    v.push(Variant {
        mode: CaptureMode::Inject,
        exact: true,
    });
    v
}

fn operators(c: &mut Criterion) {
    for kind in [MicroKind::GroupBy, MicroKind::PkFk, MicroKind::Select, MicroKind::Mn] {
        let params = MicroParams {
            n: if kind == MicroKind::Mn { 10_000 } else { 100_000 },
            groups: 1000,
            seed: SEED,
            ..MicroParams::default()
        };
        let m = Micro::new(kind, params).expect("micro fixture");
        let mut g = c.benchmark_group(kind.name());
        for v in variants() {
            let spec = m.capture(v).expect("capture spec");
            g.bench_function(BenchmarkId::from_parameter(v.label()), |b| {
                b.iter(|| {
                    let out = m.run(&spec).expect("operator");
                    out.finalize();
                    out
                })
            });
        }
        g.finish();
    }
}

criterion_group!(benches, operators);
criterion_main!(benches);
