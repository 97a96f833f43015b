use std::hint::black_box;

use batchdiff_bench::problem;
use batchdiff_core::{cg_data_consistency, solve, EpsModel, NoiseSchedule, Shape, SolverConfig};
use criterion::{criterion_group, criterion_main, Criterion};

const SHAPE: Shape = Shape {
    frames: 16,
    channels: 3,
    height: 64,
    width: 64,
};

fn operators(c: &mut Criterion) {
    let mut g = c.benchmark_group("operator");
    for d in ["temporal:uniform:7", "spatial:gauss:2.0:13", "sr:4", "temporal:uniform:7|spatial:gauss:2.0:13"] {
        let (x, a, y) = problem(SHAPE, d);
        g.bench_function(format!("apply {d}"), |b| b.iter(|| a.apply(black_box(&x)).unwrap()));
        g.bench_function(format!("adjoint {d}"), |b| b.iter(|| a.adjoint(black_box(&y)).unwrap()));
    }
    g.finish();
}

fn conjugate_gradient(c: &mut Criterion) {
    let (x, a, y) = problem(SHAPE, "temporal:uniform:7|spatial:gauss:2.0:13");
    let start = x.map(|v| 0.5 * v);
    c.bench_function("cg l=5", |b| {
        b.iter(|| cg_data_consistency(&a, black_box(&y), &start, 5, 0.0).unwrap())
    });
}

fn sampler(c: &mut Criterion) {
    let shape = Shape::new(16, 1, 32, 32);
    let (_, a, y) = problem(shape, "temporal:uniform:7");
    let model = EpsModel::Smoother { scale: 1.0 };
    let sched = NoiseSchedule::default();
    let cfg = SolverConfig::default();
    let mut g = c.benchmark_group("solve");
    g.sample_size(10);
    g.bench_function("16x1x32x32 nfe=20 l=5", |b| b.iter(|| solve(&a, black_box(&y), &model, &sched, &cfg).unwrap()));
    g.finish();
}

criterion_group!(benches, operators, conjugate_gradient, sampler);
criterion_main!(benches);
