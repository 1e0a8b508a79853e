use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use thinbasis_core::repcount::rep_count;
use thinbasis_core::RepQuery;

fn bench(c: &mut Criterion) {
    let n = 100_000;
    let r = (2.0 * n as f64).sqrt().sqrt();
    c.bench_function("rep_count_k2s5_1e5", |b| b.iter(|| rep_count(black_box(&RepQuery::plain(2, 5, n, n, r))).unwrap()));
    let mut q = RepQuery::plain(2, 5, n, n, r);
    q.distinct = true;
    c.bench_function("rep_count_k2s5_1e5_distinct", |b| b.iter(|| rep_count(black_box(&q)).unwrap()));
}

criterion_group!(benches, bench);
criterion_main!(benches);
