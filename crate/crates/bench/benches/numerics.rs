use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use stiefel_priors::linalg::{frechet_inv_sqrt, polar_project, polar_pullback_grad, SpdMatrix};
use stiefel_priors::priors::bessel_k;
use stiefel_priors::{CorrelationFamily, CorrelationMatrix};
use stiefel_priors_bench::gaussian;

fn polar(c: &mut Criterion) {
    let mut g = c.benchmark_group("polar_project");
    for (p, k) in [(100, 3), (1000, 5), (4000, 40)] {
        let x = gaussian(p, k, 0);
        g.bench_with_input(BenchmarkId::from_parameter(format!("{p}x{k}")), &x, |b, x| {
            b.iter(|| polar_project(black_box(x)).unwrap())
        });
    }
    g.finish();

    let mut g = c.benchmark_group("polar_pullback_grad");
    for (p, k) in [(30, 2), (100, 4), (1000, 5)] {
        let (x, gq) = (gaussian(p, k, 0), gaussian(p, k, 1));
        g.bench_function(format!("{p}x{k}"), |b| b.iter(|| polar_pullback_grad(black_box(&x), black_box(&gq)).unwrap()));
    }
    g.finish();
}

fn frechet(c: &mut Criterion) {
    let x = gaussian(50, 5, 3);
    let s = SpdMatrix::new(x.transpose() * &x).unwrap();
    let e = {
        let r = gaussian(5, 5, 4);
        &r + r.transpose()
    };
    c.bench_function("frechet_inv_sqrt/5", |b| b.iter(|| frechet_inv_sqrt(black_box(&s), black_box(&e)).unwrap()));
}

fn correlation(c: &mut Criterion) {
    let mut g = c.benchmark_group("correlation_matrix");
    for (name, fam) in [
        ("power", CorrelationFamily::Power { rho: 0.5 }),
        ("squared_exponential", CorrelationFamily::SquaredExponential { rho: 12.0 }),
        ("matern", CorrelationFamily::Matern { rho: 12.0, nu: 3.0 }),
    ] {
        g.bench_function(format!("{name}/500"), |b| {
            b.iter(|| CorrelationMatrix::new(black_box(fam.clone()), 500, 1.0).unwrap().c_omega())
        });
    }
    g.finish();

    let mut g = c.benchmark_group("bessel_k");
    for nu in [0.5, 3.0, 7.3] {
        for x in [0.3, 5.0, 60.0] {
            g.bench_function(format!("nu{nu}/x{x}"), |b| b.iter(|| bessel_k(black_box(nu), black_box(x)).unwrap()));
        }
    }
    g.finish();
}

criterion_group!(benches, polar, frechet, correlation);
criterion_main!(benches);
