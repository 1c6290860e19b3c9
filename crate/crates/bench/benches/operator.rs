use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fraclap_bench::{half_plane, profile};
use fraclap_core::operator::{unit_stencil, ApplyMode};
use fraclap_core::solvers::{conjugate_gradient, SolveOptions};
use std::hint::black_box;

fn assembly(c: &mut Criterion) {
    let mut g = c.benchmark_group("assemble");
    g.sample_size(10);
    for window in [16usize, 32, 64] {
        g.bench_with_input(BenchmarkId::new("stencil", window), &window, |b, &w| {
            b.iter(|| unit_stencil(2, black_box(0.37), w))
        });
        g.bench_with_input(BenchmarkId::new("operator", window), &window, |b, &w| {
            b.iter(|| half_plane(1.0 / 32.0, black_box(w)))
        });
    }
    g.finish();
}

fn apply(c: &mut Criterion) {
    let mut g = c.benchmark_group("apply");
    g.sample_size(10);
    for (mode, name) in [(ApplyMode::Direct, "direct"), (ApplyMode::Fft, "fft")] {
        let op = half_plane(1.0 / 32.0, 32).with_mode(mode);
        let u = profile(&op);
        g.bench_function(name, |b| b.iter(|| op.apply(black_box(&u)).unwrap()));
    }
    g.finish();
}

fn solve(c: &mut Criterion) {
    let op = half_plane(1.0 / 16.0, 32);
    let n = op.interior().len();
    let rhs = vec![1.0; n];
    let opts = SolveOptions::default();
    let mut g = c.benchmark_group("solve");
    g.sample_size(10);
    g.bench_function("cg", |b| {
        b.iter(|| {
            let mut x = vec![0.0; n];
            conjugate_gradient(&op, 0.0, black_box(&rhs), &mut x, opts.linear_tol, opts.linear_cap).unwrap();
            x
        })
    });
    g.finish();
}

criterion_group!(benches, assembly, apply, solve);
criterion_main!(benches);
