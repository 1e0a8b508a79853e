use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use thinbasis_core::singular::{sing_series, QSumEvaluator};
use thinbasis_core::Route;

fn bench(c: &mut Criterion) {
    c.bench_function("qsum_evaluator_new_Q60", |b| b.iter(|| QSumEvaluator::new(2, 9, black_box(60)).unwrap()));
    let ev = QSumEvaluator::new(2, 9, 60).unwrap();
    c.bench_function("qsum_eval_Q60", |b| b.iter(|| ev.eval(black_box(1_000_003))));
    let route = Route::Euler { tolerance: 1e-9, max_depth: 6 };
    c.bench_function("euler_k3s13", |b| b.iter(|| sing_series(black_box(1_000_003), 3, 13, route).unwrap()));
}

criterion_group!(benches, bench);
criterion_main!(benches);
