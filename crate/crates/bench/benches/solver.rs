use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qvelab_bench::fixtures;
use qvelab_core::{solve, solve_grid, uniform_grid, Complex64, SolverConfig};

fn single_point(c: &mut Criterion) {
    let cfg = SolverConfig::default();
    let mut g = c.benchmark_group("solve");
    for (name, model) in fixtures() {
        for (label, z) in [("bulk", Complex64::new(0.5, 1e-3)), ("near_real", Complex64::new(1.9, 1e-6))] {
            g.bench_with_input(BenchmarkId::new(name, label), &z, |b, z| b.iter(|| solve(&model, *z, &cfg).unwrap()));
        }
    }
    g.finish();
}

fn grid(c: &mut Criterion) {
    let cfg = SolverConfig::default();
    let taus = uniform_grid(-3.0, 3.0, 0.03);
    let mut g = c.benchmark_group("solve_grid");
    g.sample_size(10);
    // the 256-point model takes minutes per grid near the real axis
    for (name, model) in fixtures().into_iter().take(2) {
        g.bench_function(name, |b| b.iter(|| solve_grid(&model, &taus, 1e-6, &cfg).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, single_point, grid);
criterion_main!(benches);
