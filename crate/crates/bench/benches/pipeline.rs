use std::path::PathBuf;

use criterion::{criterion_group, criterion_main, Criterion};

use regsim_core::scenario::{simulate, Scenario};

fn pipeline(c: &mut Criterion) {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut group = c.benchmark_group("simulate");
    group.sample_size(10);
    for name in ["test0", "test2"] {
        let sc = Scenario::load(&dir.join(format!("{name}.scenario"))).unwrap();
        group.bench_function(name, |b| b.iter(|| simulate(&sc).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, pipeline);
criterion_main!(benches);
