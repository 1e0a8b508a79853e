use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use thinbasis_core::randbasis::{decomposition_window, sample_basis};
use thinbasis_core::{BasisParams, Growth};

fn bench(c: &mut Criterion) {
    let params = BasisParams::new(2, 9, 0.5, Growth::log());
    c.bench_function("sample_basis_1e6", |b| b.iter(|| sample_basis(black_box(42), &params, 1_000_000).unwrap()));
    let sample = sample_basis(42, &params, 1_000_000).unwrap();
    let tau0 = params.tau0().unwrap();
    c.bench_function("decomposition_window_1e6_w16", |b| {
        b.iter(|| decomposition_window(&sample, tau0, black_box(1_000_000), 1_000_015).unwrap())
    });
}

criterion_group!(benches, bench);
criterion_main!(benches);
