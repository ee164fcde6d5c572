//! Invariants of the models, targets and prognostics as property tests.

mod common;

use hbprog::degradation::{
    crack_length, cycles_to_length, first_crossing, CrackNominals, CrackParams, Crossing, DoubleExpModel, ParisModel,
};
use hbprog::math::logsumexp;
use hbprog::prognostics::{end_of_life, predict_trajectory, rul_distribution};
use hbprog::targets::{HyperLayout, HyperPriorBounds, HyperTarget, MixturePrior};
use hbprog::{DegradationModel, Eol, PriorCase, PrognosisConfig, SampleSet};
use proptest::prelude::*;

fn paris() -> ParisModel {
    ParisModel::new(CrackNominals::default(), common::crack_geometry(), common::crack_loading()).unwrap()
}

fn theta_strategy() -> impl Strategy<Value = (f64, f64)> {
    (0.85f64..1.3, 1.0f64..1.1)
}

fn point_set(rows: Vec<(f64, f64, f64)>) -> SampleSet {
    let rows: Vec<Vec<f64>> = rows.into_iter().map(|(a, b, c)| vec![a, b, c]).collect();
    SampleSet::from_rows(vec!["theta1".into(), "theta2".into(), "sigma".into()], &rows).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn logsumexp_shifts(xs in prop::collection::vec(-50.0f64..50.0, 1..20), c in -100.0f64..100.0) {
        let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
        prop_assert!((logsumexp(&shifted) - logsumexp(&xs) - c).abs() < 1e-10);
    }

    #[test]
    fn crack_grows_and_inverts((t1, t2) in theta_strategy(), f1 in 0.05f64..0.95, f2 in 0.05f64..0.95) {
        let p = CrackParams::new(t1, t2, CrackNominals::default()).unwrap();
        let (g, l) = (common::crack_geometry(), common::crack_loading());
        let Ok(life) = cycles_to_length(&p, &g, &l, g.a_f) else { return Ok(()) };
        prop_assume!(life.is_finite() && life > 100.0);
        let (lo, hi) = (f1.min(f2) * life, f1.max(f2) * life);
        prop_assume!(hi - lo > 1.0);
        let (a_lo, a_hi) = (crack_length(&p, &g, &l, lo).unwrap(), crack_length(&p, &g, &l, hi).unwrap());
        prop_assert!(a_lo < a_hi);
        let back = cycles_to_length(&p, &g, &l, a_hi).unwrap();
        prop_assert!((back - hi).abs() <= 1e-9 * hi);
    }

    #[test]
    fn hyper_target_ignores_dataset_order(
        sets in prop::collection::vec(prop::collection::vec((0.9f64..1.2, 1.0f64..1.1, 0.01f64..0.19), 1..5), 2..4),
        seed in 0u64..1000,
    ) {
        let layout = HyperLayout::new(2, PriorCase::Diag, 0.2).unwrap();
        let bounds = HyperPriorBounds::crack_default();
        let fwd: Vec<SampleSet> = sets.iter().cloned().map(point_set).collect();
        let rev: Vec<SampleSet> = fwd.iter().rev().cloned().collect();
        let a = HyperTarget::new(layout, bounds.clone(), &fwd).unwrap();
        let b = HyperTarget::new(layout, bounds.clone(), &rev).unwrap();
        let psi = bounds.sample(&layout, &mut hbprog::samplers::rng_from_seed(seed));
        prop_assert_eq!(a.log_target(&psi).to_bits(), b.log_target(&psi).to_bits());
    }

    #[test]
    fn mixture_prior_ignores_row_order(seed in 0u64..1000, n in 1usize..8) {
        let layout = HyperLayout::new(2, PriorCase::Corr, 0.2).unwrap();
        let bounds = HyperPriorBounds::crack_default();
        let mut rng = hbprog::samplers::rng_from_seed(seed);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| bounds.sample(&layout, &mut rng)).collect();
        let rev: Vec<Vec<f64>> = rows.iter().rev().cloned().collect();
        let a = MixturePrior::new(&SampleSet::from_rows(layout.labels(), &rows).unwrap(), &layout).unwrap();
        let b = MixturePrior::new(&SampleSet::from_rows(layout.labels(), &rev).unwrap(), &layout).unwrap();
        let point = [1.05, 1.04, 0.05];
        prop_assert!((a.logpdf(&point) - b.logpdf(&point)).abs() < 1e-12);
    }

    #[test]
    fn crack_eol_matches_bisection((t1, t2) in theta_strategy()) {
        let model = paris();
        let cfg = PrognosisConfig::new(10.0, -1.0, 1e9);
        let Ok(Eol::At(t)) = end_of_life(&[t1, t2, 0.05], &model, &cfg) else { return Ok(()) };
        let scan = first_crossing(|k| model.predict(&[t1, t2], k), Crossing::Upward, 10.0, -1.0, 1e9).unwrap();
        let Eol::At(s) = scan else { panic!("closed form crossed, scan did not") };
        // the scan reports the first integer cycle at or past the crossing
        prop_assert!(s - t >= -0.5 && s - t < 1.0 + 1e-9, "closed form {t}, scan {s}");
    }
}

#[test]
fn rul_is_eol_minus_cutoff_per_sample() {
    let model = paris();
    let s = point_set(vec![(1.0, 1.05, 0.05), (1.1, 1.04, 0.05), (0.95, 1.06, 0.05)]);
    let cfg = PrognosisConfig::new(10.0, 5000.0, 1e7);
    let rul = rul_distribution(&s, &model, &cfg).unwrap();
    for (eol, r) in rul.eol.iter().zip(&rul.rul) {
        assert_eq!(eol.unwrap() - 5000.0, *r);
    }
}

#[test]
fn faster_growth_gives_smaller_rul() {
    let model = paris();
    let cfg = PrognosisConfig::new(10.0, 1000.0, 1e8);
    let base: Vec<(f64, f64, f64)> = (0..50).map(|i| (0.95 + 0.004 * i as f64, 1.05, 0.05)).collect();
    // smaller θ₂ means larger C because ln C₀ is negative
    let faster: Vec<(f64, f64, f64)> = base.iter().map(|&(a, b, c)| (a, b - 0.005, c)).collect();
    let slow = rul_distribution(&point_set(base), &model, &cfg).unwrap();
    let fast = rul_distribution(&point_set(faster), &model, &cfg).unwrap();
    for (f, s) in fast.rul.iter().zip(&slow.rul) {
        assert!(f < s, "{f} !< {s}");
    }
}

#[test]
fn battery_crossing_matches_exhaustive_scan() {
    let model = DoubleExpModel::default();
    for theta in [[1.0, 1.0, 1.0, 1.0], [0.97, 0.15, 1.0, 1.0], [0.95, 0.1, 1.5, 0.5]] {
        let Eol::At(t) = model.end_of_life(&theta, 1.4, 0.0, 1e5).unwrap() else { panic!("no crossing") };
        let brute = (1..100_000).find(|&k| model.predict(&theta, k as f64).unwrap() <= 1.4).unwrap() as f64;
        assert!((t - brute).abs() <= 1.0, "{t} vs {brute}");
    }
    let flat = [1.0, 0.0, 1.0, 0.0];
    assert_eq!(model.end_of_life(&flat, 1.4, 0.0, 1e5).unwrap(), Eol::Censored);
}

#[test]
fn bands_are_ordered_and_collapse_for_one_sample() {
    let model = paris();
    let grid: Vec<f64> = (1..=40).map(|k| k as f64 * 500.0).collect();
    let cfg = PrognosisConfig::new(10.0, 0.0, 1e7);
    let one = point_set(vec![(1.03, 1.05, 0.05)]);
    let b = predict_trajectory(&one, &model, &grid, &cfg).unwrap();
    for (k, q) in grid.iter().zip(&b.values) {
        let exact = model.predict(&[1.03, 1.05], *k).unwrap_or(f64::INFINITY);
        assert!(q.iter().all(|v| *v == exact));
    }
    let many = point_set((0..200).map(|i| (0.95 + 0.001 * i as f64, 1.04 + 0.0001 * i as f64, 0.05)).collect());
    let b = predict_trajectory(&many, &model, &grid, &cfg).unwrap();
    for q in &b.values {
        assert!(q.windows(2).all(|w| w[0] <= w[1]));
    }
    let medians: Vec<f64> = b.values.iter().map(|q| q[1]).collect();
    assert!(medians.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn noisy_band_covers_held_out_points() {
    let model = paris();
    let theta = [1.03, 1.05];
    let sigma = 0.05;
    let grid: Vec<f64> = (1..=30).map(|k| k as f64 * 600.0).collect();
    let rows = vec![(theta[0], theta[1], sigma); 4000];
    let cfg = PrognosisConfig { include_observation_noise: true, seed: 9, ..PrognosisConfig::new(10.0, 0.0, 1e7) };
    let bands = predict_trajectory(&point_set(rows), &model, &grid, &cfg).unwrap();

    let spec = hbprog::io::SyntheticSpec {
        psi: hbprog::HyperParameters { mu0: theta.to_vec(), sd0: vec![1e-9, 1e-9], rho: None, mu_sigma: sigma, sd_sigma: 1e-9 },
        n_units: 20,
        cycles: grid.clone(),
        ..common::crack_fleet(20, 600.0, "H")
    };
    let (held_out, _) = hbprog::io::generate_synthetic(&spec, 5).unwrap();
    let (mut inside, mut total) = (0usize, 0usize);
    for d in &held_out {
        for (k, y) in d.cycles().iter().zip(d.values()) {
            let i = grid.iter().position(|g| g == k).unwrap();
            let q = &bands.values[i];
            inside += (q[0] <= *y && *y <= q[2]) as usize;
            total += 1;
        }
    }
    // binomial: 95% of n points, 4 standard deviations of slack
    let n = total as f64;
    let expected = 0.95 * n;
    let slack = 4.0 * (n * 0.95 * 0.05).sqrt();
    assert!((inside as f64 - expected).abs() <= slack, "{inside}/{total} inside the 95% band");
}
