use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use stiefel_priors::inference::PolarPriorPosterior;
use stiefel_priors::rng::stream_rng;
use stiefel_priors::{
    hmc_sample, CorrelationFamily, CorrelationMatrix, EntryLaw, HmcConfig, ModelPosterior,
    ShrinkageLaw, StructuredPriorSpec,
};
use stiefel_priors_bench::{eigenmodel, svd_model};

fn priors(c: &mut Criterion) {
    let law = ShrinkageLaw::new(0.2).unwrap();
    c.bench_function("shrinkage_sample/10000", |b| {
        let mut rng = stream_rng(0, 0);
        b.iter(|| law.sample(10_000, &mut rng))
    });
    let omega = CorrelationMatrix::new(CorrelationFamily::Matern { rho: 12.0, nu: 3.0 }, 200, 1.0).unwrap();
    let spec = StructuredPriorSpec::new(200, 3, EntryLaw::StandardNormal, omega.into()).unwrap();
    c.bench_function("sample_prior_q/matern_200x3", |b| {
        let mut rng = stream_rng(0, 1);
        b.iter(|| spec.sample_q(&mut rng).unwrap())
    });
}

fn gradients(c: &mut Criterion) {
    let (m, theta) = eigenmodel(30, 2);
    let mut grad = vec![0.0; theta.len()];
    c.bench_function("eigenmodel_logpost/30x2", |b| {
        b.iter(|| m.log_density_grad(black_box(&theta), &mut grad).unwrap())
    });

    let (m, mut theta) = svd_model(60, 100, 2);
    let mut grad = vec![0.0; theta.len()];
    c.bench_function("svd_logpost/60x100x2/cached_rho", |b| {
        b.iter(|| m.log_density_grad(black_box(&theta), &mut grad).unwrap())
    });
    let last = theta.len() - 1;
    let mut step = 0.0;
    c.bench_function("svd_logpost/60x100x2/new_rho", |b| {
        b.iter(|| {
            step += 1e-9;
            theta[last] += step;
            m.log_density_grad(black_box(&theta), &mut grad).unwrap()
        })
    });
}

fn sampler(c: &mut Criterion) {
    let omega = CorrelationMatrix::new(CorrelationFamily::Power { rho: 0.5 }, 30, 1.0).unwrap();
    let model = PolarPriorPosterior::new(omega.entries(), 2).unwrap();
    let cfg = HmcConfig { chains: 2, warmup: 200, draws: 200, ..HmcConfig::default() };
    let mut g = c.benchmark_group("hmc");
    g.sample_size(10);
    g.bench_function("polar_prior_30x2/2x400", |b| b.iter(|| hmc_sample(&model, black_box(&cfg)).unwrap()));
    g.finish();
}

criterion_group!(benches, priors, gradients, sampler);
criterion_main!(benches);
