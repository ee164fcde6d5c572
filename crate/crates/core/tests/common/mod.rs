//! Oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use hbprog::degradation::{CrackGeometry, LoadingSpec};
use hbprog::io::SyntheticSpec;
use hbprog::{HyperParameters, ModelFamily};

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance
/// `tol`, started from 256 equal panels so narrow peaks are not missed.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    const PANELS: usize = 256;
    let h = (b - a) / PANELS as f64;
    (0..PANELS).map(|i| simpson_panel(f, a + i as f64 * h, a + (i + 1) as f64 * h, tol / PANELS as f64)).sum()
}

fn simpson_panel(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Crack length after `dn` cycles from integrating `da/dN = K a^(m/2)` with
/// classical Runge-Kutta on `y = ln a`, where `K = C (Δσ √π)^m`.
pub fn paris_ode(a0: f64, dn: f64, c: f64, delta_sigma: f64, m: f64, steps: usize) -> f64 {
    let k = c * (delta_sigma * std::f64::consts::PI.sqrt()).powf(m);
    let rate = |y: f64| k * ((0.5 * m - 1.0) * y).exp();
    let h = dn / steps as f64;
    let mut y = a0.ln();
    for _ in 0..steps {
        let k1 = rate(y);
        let k2 = rate(y + 0.5 * h * k1);
        let k3 = rate(y + 0.5 * h * k2);
        let k4 = rate(y + h * k3);
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    y.exp()
}

pub fn crack_geometry() -> CrackGeometry {
    CrackGeometry { a0: 1.0, n0: 0.0, a_f: 10.0 }
}

pub fn crack_loading() -> LoadingSpec {
    LoadingSpec::Constant { delta_sigma: 72.0 }
}

/// Hyperparameters of the synthetic crack fleet.
pub fn crack_psi() -> HyperParameters {
    HyperParameters { mu0: vec![1.03, 1.05], sd0: vec![0.03, 0.01], rho: None, mu_sigma: 0.05, sd_sigma: 0.02 }
}

/// Six-unit crack fleet inspected every `step` cycles until failure.
pub fn crack_fleet(n_units: usize, step: f64, prefix: &str) -> SyntheticSpec {
    SyntheticSpec {
        family: ModelFamily::from_name("paris").unwrap(),
        psi: crack_psi(),
        sigma_upper: 0.2,
        n_units,
        cycles: (1..=(200_000.0 / step) as usize).map(|k| k as f64 * step).collect(),
        noise_level: None,
        geometry: Some(crack_geometry()),
        loading: Some(crack_loading()),
        threshold: None,
        stop_at_threshold: true,
        horizon: 1e7,
        id_prefix: prefix.into(),
    }
}

/// Three-cell battery fleet following the double-exponential law.
pub fn battery_fleet() -> SyntheticSpec {
    SyntheticSpec {
        family: ModelFamily::from_name("batt-double").unwrap(),
        psi: HyperParameters {
            mu0: vec![0.97, 0.15, 1.0, 1.0],
            sd0: vec![0.01, 0.01, 0.05, 0.05],
            rho: None,
            mu_sigma: 0.01,
            sd_sigma: 0.002,
        },
        sigma_upper: 0.4,
        n_units: 3,
        cycles: (1..=160).map(|k| k as f64).collect(),
        noise_level: None,
        geometry: None,
        loading: None,
        threshold: Some(1.4),
        stop_at_threshold: false,
        horizon: 1e4,
        id_prefix: "B".into(),
    }
}
