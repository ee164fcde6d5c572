//! Micro-benchmarks of the inner kernels: model evaluation, the hyper-level
//! target, the mixture prior and both samplers.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use hbprog::degradation::{crack_length, CrackGeometry, CrackNominals, CrackParams, LoadingSpec};
use hbprog::samplers::{rng_from_seed, slice_sample, tmcmc, Interval, SamplerConfig, TargetSpec, TmcmcProblem};
use hbprog::targets::{HyperLayout, HyperPriorBounds, HyperTarget, MixturePrior};
use hbprog::{PriorCase, SampleSet};
use rand_distr::{Distribution, Normal};

fn crack_setup() -> (CrackParams, CrackGeometry, LoadingSpec) {
    let params = CrackParams::new(1.03, 1.05, CrackNominals::default()).unwrap();
    let geometry = CrackGeometry { a0: 1.0, n0: 0.0, a_f: 10.0 };
    (params, geometry, LoadingSpec::Constant { delta_sigma: 72.0 })
}

/// Six stage-1 sample sets of 500 points around the nominal crack parameters.
fn stage1_sets() -> Vec<SampleSet> {
    let mut rng = rng_from_seed(1);
    let noise = Normal::new(0.0f64, 0.02).unwrap();
    (0..6)
        .map(|_| {
            let rows: Vec<Vec<f64>> = (0..500)
                .map(|_| {
                    let t1 = 1.03 + noise.sample(&mut rng);
                    let t2 = 1.05 + noise.sample(&mut rng) * 0.3;
                    vec![t1, t2, 0.05 + noise.sample(&mut rng).abs()]
                })
                .collect();
            SampleSet::from_rows(vec!["theta1".into(), "theta2".into(), "sigma".into()], &rows).unwrap()
        })
        .collect()
}

fn gaussian_2d(rho: f64) -> impl Fn(&[f64]) -> f64 + Send + Sync {
    move |x: &[f64]| -(x[0] * x[0] - 2.0 * rho * x[0] * x[1] + x[1] * x[1]) / (2.0 * (1.0 - rho * rho))
}

fn bench_models(c: &mut Criterion) {
    let (p, g, l) = crack_setup();
    c.bench_function("crack_length", |b| b.iter(|| crack_length(&p, &g, &l, black_box(25_000.0)).unwrap()));
}

fn bench_targets(c: &mut Criterion) {
    let sets = stage1_sets();
    let bounds = HyperPriorBounds::crack_default();
    let layout = HyperLayout::new(2, PriorCase::Diag, 0.2).unwrap();
    let target = HyperTarget::new(layout, bounds.clone(), &sets).unwrap();
    let psi = [1.03, 1.05, 0.03, 0.01, 0.05, 0.02];
    c.bench_function("hyper_target_6x500", |b| b.iter(|| target.log_target(black_box(&psi))));

    let mut rng = rng_from_seed(2);
    let rows: Vec<Vec<f64>> = (0..500).map(|_| bounds.sample(&layout, &mut rng)).collect();
    let prior = MixturePrior::new(&SampleSet::from_rows(layout.labels(), &rows).unwrap(), &layout).unwrap();
    c.bench_function("mixture_prior_500", |b| b.iter(|| prior.logpdf(black_box(&[1.03, 1.05, 0.05]))));
}

fn bench_samplers(c: &mut Criterion) {
    let labels = vec!["x".to_string(), "y".to_string()];
    let target = TargetSpec::new("gauss", labels.clone(), gaussian_2d(0.8));
    let cfg = SamplerConfig { n_samples: 1000, ..SamplerConfig::default() };
    c.bench_function("slice_2d_1000", |b| b.iter(|| slice_sample(&target, &[0.0, 0.0], &cfg).unwrap()));

    let box_prior = [Interval::new(-5.0, 5.0), Interval::new(-5.0, 5.0)];
    let problem = TmcmcProblem::new(
        "gauss",
        labels,
        move |rng| box_prior.iter().map(|s| s.lo + (s.hi - s.lo) * rand::Rng::random::<f64>(rng)).collect(),
        |_| 0.0,
        gaussian_2d(0.8),
    );
    let cfg = SamplerConfig { n_samples: 500, ..SamplerConfig::default() };
    let mut group = c.benchmark_group("tmcmc");
    group.sample_size(10);
    group.bench_function("tmcmc_2d_500", |b| b.iter(|| tmcmc(&problem, &cfg).unwrap()));
    group.finish();
}

criterion_group!(benches, bench_models, bench_targets, bench_samplers);
criterion_main!(benches);
