use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use nalgebra::DMatrix;

use sce_core::classical_dynamics::{integrate_full, integrate_trajectory};
use sce_core::metaplectic::mw_matrices;
use sce_core::phase_space::random_symplectic;
use sce_core::quantum_oracle::{coherent_state, eigensolve, propagate_splitstep, Potential};
use sce_core::{Grid1D, Model, PhasePoint, SymplecticMatrix};

fn metaplectic(c: &mut Criterion) {
    let f1 = random_symplectic(1, 3, 1.0).unwrap();
    let f2 = random_symplectic(2, 3, 1.0).unwrap();
    c.bench_function("mw_matrices n=1", |b| b.iter(|| mw_matrices(black_box(&f1)).unwrap()));
    c.bench_function("mw_matrices n=2", |b| b.iter(|| mw_matrices(black_box(&f2)).unwrap()));
    let s = DMatrix::from_row_slice(4, 4, &[
        1.0, 0.2, 0.0, 0.1, 0.2, 0.5, 0.3, 0.0, 0.0, 0.3, 2.0, 0.4, 0.1, 0.0, 0.4, 1.5,
    ]);
    c.bench_function("quadratic_flow 4x4", |b| b.iter(|| SymplecticMatrix::quadratic_flow(black_box(&s), 2.5).unwrap()));
}

fn classical(c: &mut Criterion) {
    let h = Model::Pendulum;
    let z0 = PhasePoint::new1(1.0, 0.0);
    c.bench_function("rk4 pendulum 1e4 steps", |b| b.iter(|| integrate_trajectory(&h, black_box(&z0), 10.0, 1e-3).unwrap()));
    c.bench_function("rk4 pendulum full columns 1e4 steps", |b| {
        b.iter(|| integrate_full(&h, black_box(&z0), 10.0, 1e-3).unwrap())
    });
}

fn quantum(c: &mut Criterion) {
    let grid = Grid1D::new(-10.0, 10.0, 2048).unwrap();
    let psi = coherent_state(&PhasePoint::new1(1.0, 0.5), 0.1, &grid).unwrap();
    let v = |x: f64| 0.5 * x * x;
    let mut g = c.benchmark_group("oracle");
    g.sample_size(20);
    g.bench_function("split-step 2048 pts 1000 steps", |b| {
        b.iter(|| propagate_splitstep(black_box(&psi), &Potential::Static(&v), 1.0, 1e-3).unwrap())
    });
    let half = Grid1D::half_line(10.0, 4096).unwrap();
    g.bench_function("eigensolve half-line 4096 pts k=6", |b| {
        b.iter(|| eigensolve(|x| 0.5 * x * x + 1.0 / (x * x), black_box(&half), 6, 1.0).unwrap())
    });
    g.finish();
}

criterion_group!(benches, metaplectic, classical, quantum);
criterion_main!(benches);
