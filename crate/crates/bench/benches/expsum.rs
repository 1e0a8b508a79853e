use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use thinbasis_core::expsum::{gauss_sums_all, FrequencyTable};
use thinbasis_core::moments::{default_grid, exact_even_moment, quad_moment_table};
use thinbasis_core::{ArcSet, Variant, WeylSumSpec};

fn spec(p: f64) -> WeylSumSpec {
    WeylSumSpec { k: 2, s: 9, p, r: p.sqrt(), variant: Variant::Weighted }
}

fn bench(c: &mut Criterion) {
    let table = FrequencyTable::from_spec(&spec(1e4)).unwrap();
    c.bench_function("weyl_eval_P1e4", |b| b.iter(|| table.eval(black_box(0.291_57))));

    let small = FrequencyTable::from_spec(&spec(300.0)).unwrap();
    let grid = default_grid(&small);
    c.bench_function("quad_moment_P300_t4", |b| {
        b.iter(|| quad_moment_table(&small, black_box(4.0), ArcSet::Full, 300.0, 2, grid).unwrap())
    });
    c.bench_function("exact_even_moment_P300_w2", |b| b.iter(|| exact_even_moment(&small, black_box(2)).unwrap()));
    c.bench_function("gauss_sums_q997_k3", |b| b.iter(|| gauss_sums_all(black_box(997), 3)));
}

criterion_group!(benches, bench);
criterion_main!(benches);
