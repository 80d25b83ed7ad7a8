use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use layerpot_bench::offsets;
use layerpot_core::kernels::{riesz, ConstKernel, FrozenKernel, KernelSpec};
use layerpot_core::matrixfield::MatrixField;
use layerpot_core::spherical::{build_quadrature, decompose, eval_all, level_for, DEFAULT_SMOOTHNESS_MARGIN};
use layerpot_core::{Mat3, Point};

fn kernel_evaluation(c: &mut Criterion) {
    let zs = offsets(1024);
    let a0 = ConstKernel::new(Mat3::new(1.3, 0.2, 0.0, 0.2, 1.0, 0.1, 0.0, 0.1, 0.8)).unwrap();
    c.bench_function("riesz/1024", |b| b.iter(|| zs.iter().map(|z| riesz(black_box(z))).sum::<Point>()));
    c.bench_function("grad_theta/1024", |b| b.iter(|| zs.iter().map(|z| a0.grad_general(black_box(z))).sum::<Point>()));

    let frozen = KernelSpec::Frozen(FrozenKernel::new(MatrixField::log_dini(0.25), 256, 0).unwrap());
    let x = Point::new(0.01, 0.02, 0.0);
    c.bench_function("frozen_row/1024", |b| {
        b.iter(|| {
            let mut row = frozen.row_evaluator(x);
            zs.iter().map(|z| row.eval(&(x - z))).sum::<Point>()
        })
    });
}

fn harmonics(c: &mut Criterion) {
    let z = Point::new(0.3, -0.4, 0.5).normalize();
    c.bench_function("eval_all/j24", |b| b.iter(|| eval_all(24, black_box(&z))));
    let quad = build_quadrature(level_for(16, DEFAULT_SMOOTHNESS_MARGIN)).unwrap();
    c.bench_function("decompose_riesz/j16", |b| b.iter(|| decompose(riesz, 16, &quad).unwrap()));
}

criterion_group!(benches, kernel_evaluation, harmonics);
criterion_main!(benches);
