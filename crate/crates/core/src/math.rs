//! Numerically stable helpers shared by the log-density code.

use rand::Rng;
use statrs::function::erf::{erfc, erfc_inv};
use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

/// ½·ln(2π)
pub const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// `ln Σ exp(x_i)` with the max-shift trick. Empty input gives `-inf`.
pub fn logsumexp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max.is_infinite() {
        return max;
    }
    let sum: f64 = values.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}

/// `ln( (1/n) Σ exp(x_i) )`.
pub fn log_mean_exp(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NEG_INFINITY;
    }
    logsumexp(values) - (values.len() as f64).ln()
}

/// Standard normal upper tail `Q(x) = 1 - Φ(x)`.
#[inline]
pub fn normal_sf(x: f64) -> f64 {
    0.5 * erfc(x * FRAC_1_SQRT_2)
}

/// Standard normal CDF `Φ(x)`.
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// `ln Φ(x)`, finite far into the lower tail.
pub fn log_normal_cdf(x: f64) -> f64 {
    if x > -30.0 {
        return normal_cdf(x).ln();
    }
    // asymptotic Mills-ratio expansion; erfc underflows around x = -38
    let x2 = x * x;
    let series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
    -0.5 * x2 - (-x).ln() - HALF_LN_2PI + series.ln()
}

/// `ln(Φ(b) - Φ(a))` for `a < b`, evaluated on whichever tail keeps precision.
pub fn log_normal_interval(a: f64, b: f64) -> f64 {
    if !(a < b) {
        return f64::NEG_INFINITY;
    }
    if a > 0.0 {
        // mirror into the lower tail: Q(a) - Q(b) = Φ(-a) - Φ(-b)
        return log_normal_interval(-b, -a);
    }
    if b <= 0.0 {
        let lb = log_normal_cdf(b);
        let la = log_normal_cdf(a);
        return lb + (-(la - lb).exp_m1()).ln();
    }
    (1.0 - normal_cdf(a) - normal_sf(b)).ln()
}

/// Standard normal quantile, polished by one Newton step.
pub fn normal_quantile(p: f64) -> f64 {
    let x = -SQRT_2 * erfc_inv(2.0 * p);
    if !x.is_finite() {
        return x;
    }
    let density = (-0.5 * x * x - HALF_LN_2PI).exp();
    if density > 0.0 {
        x - (normal_cdf(x) - p) / density
    } else {
        x
    }
}

/// Log-density of `N(x | mean, sd)`.
#[inline]
pub fn normal_logpdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -HALF_LN_2PI - sd.ln() - 0.5 * z * z
}

/// Draws from `N(mean, sd)` truncated to `(lower, upper)`.
///
/// Plain rejection when the interval carries reasonable mass, inverse-CDF on
/// the relevant tail otherwise.
pub fn sample_truncated_normal<R: Rng + ?Sized>(
    rng: &mut R,
    mean: f64,
    sd: f64,
    lower: f64,
    upper: f64,
) -> f64 {
    let a = (lower - mean) / sd;
    let b = (upper - mean) / sd;
    let mass = log_normal_interval(a, b).exp();
    if mass > 0.25 {
        loop {
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            if z > a && z < b {
                return mean + sd * z;
            }
        }
    }
    let u: f64 = rng.random();
    let z = if a > 0.0 {
        // upper tail, work with survival probabilities
        let (qa, qb) = (normal_sf(a), normal_sf(b));
        let q = qb + u * (qa - qb);
        SQRT_2 * erfc_inv(2.0 * q)
    } else {
        let (pa, pb) = (normal_cdf(a), normal_cdf(b));
        normal_quantile(pa + u * (pb - pa))
    };
    (mean + sd * z).clamp(lower, upper)
}

/// Empirical quantile with linear interpolation between order statistics
/// (type 7). `sorted` must be ascending.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
            let lo = h.floor() as usize;
            let hi = h.ceil() as usize;
            let (xl, xh) = (sorted[lo], sorted[hi]);
            if lo == hi || xl == xh {
                xl
            } else if xl.is_infinite() || xh.is_infinite() {
                if h - lo as f64 >= 0.5 {
                    xh
                } else {
                    xl
                }
            } else {
                xl + (h - lo as f64) * (xh - xl)
            }
        }
    }
}

/// Sum that is independent of the order of `values`.
pub fn order_invariant_sum(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum()
}

/// Mean and unbiased variance.
pub fn mean_var(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var)
}

/// Lower Cholesky factor of a row-major symmetric `d × d` matrix.
///
/// Pivots at or below `1e-14 · max diagonal` give a zero column, so positive
/// semidefinite input (e.g. a coordinate that never moves) is accepted.
pub fn cholesky_psd(a: &[f64], d: usize) -> Vec<f64> {
    let scale = (0..d).map(|i| a[i * d + i]).fold(0.0, f64::max);
    let tol = 1e-14 * scale;
    let mut l = vec![0.0; d * d];
    for j in 0..d {
        let mut s = a[j * d + j];
        for k in 0..j {
            s -= l[j * d + k] * l[j * d + k];
        }
        if s <= tol {
            continue;
        }
        let pivot = s.sqrt();
        l[j * d + j] = pivot;
        for i in j + 1..d {
            let mut v = a[i * d + j];
            for k in 0..j {
                v -= l[i * d + k] * l[j * d + k];
            }
            l[i * d + j] = v / pivot;
        }
    }
    l
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use std::f64::consts::PI;

    #[test]
    fn logsumexp_handles_infinities() {
        assert_eq!(logsumexp(&[]), f64::NEG_INFINITY);
        assert_eq!(logsumexp(&[f64::NEG_INFINITY; 3]), f64::NEG_INFINITY);
        assert_eq!(logsumexp(&[1.0, f64::INFINITY]), f64::INFINITY);
        let v = logsumexp(&[-1.0, -2.0, -3.0]);
        let direct = ((-1.0f64).exp() + (-2.0f64).exp() + (-3.0f64).exp()).ln();
        assert!((v - direct).abs() < 1e-15);
        // no overflow for large arguments
        assert!((logsumexp(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn logsumexp_shift_equivariant(xs in prop::collection::vec(-50.0f64..50.0, 1..20), c in -100.0f64..100.0) {
            let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
            let lhs = logsumexp(&shifted);
            let rhs = logsumexp(&xs) + c;
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
        }
    }

    #[test]
    fn normal_interval_matches_direct_and_tails() {
        let direct = normal_cdf(1.0) - normal_cdf(-0.5);
        assert!((log_normal_interval(-0.5, 1.0).exp() - direct).abs() < 1e-14);
        // deep lower tail: finite and close to ln Φ(b)
        let v = log_normal_interval(-60.0, -40.0);
        assert!(v.is_finite());
        assert!((v - log_normal_cdf(-40.0)).abs() < 1e-10);
        // deep upper tail mirrors
        assert!((log_normal_interval(40.0, 60.0) - v).abs() < 1e-12);
        assert_eq!(log_normal_interval(1.0, 1.0), f64::NEG_INFINITY);
    }

    #[test]
    fn log_cdf_branches_join() {
        let near = normal_cdf(-29.999).ln();
        let asym = log_normal_cdf(-30.001);
        assert!((near - asym).abs() < 0.07);
        assert!((log_normal_cdf(-30.0) - normal_cdf(-30.0).ln()).abs() < 1e-9);
    }

    #[test]
    fn quantile_roundtrip() {
        for p in [1e-10, 0.025, 0.3, 0.5, 0.975] {
            assert!((normal_cdf(normal_quantile(p)) - p).abs() < 1e-12 * p.max(1e-3));
        }
    }

    #[test]
    fn truncated_normal_stays_in_range() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for &(m, s, lo, hi) in &[(0.0, 1.0, -0.5, 0.5), (0.4, 0.01, 0.0, 0.2), (-1.0, 0.05, 0.0, 0.2)] {
            for _ in 0..2000 {
                let x = sample_truncated_normal(&mut rng, m, s, lo, hi);
                assert!(x >= lo && x <= hi, "{x} outside ({lo},{hi})");
            }
        }
        // mean of N(0,1) truncated to (0, inf-ish) is sqrt(2/pi)
        let n = 40_000;
        let sum: f64 = (0..n).map(|_| sample_truncated_normal(&mut rng, 0.0, 1.0, 0.0, 50.0)).sum();
        assert!((sum / n as f64 - (2.0 / PI).sqrt()).abs() < 0.02);
    }

    #[test]
    fn quantiles_interpolate() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&s, 0.0), 1.0);
        assert_eq!(quantile_sorted(&s, 1.0), 4.0);
        assert!((quantile_sorted(&s, 0.5) - 2.5).abs() < 1e-15);
        assert_eq!(quantile_sorted(&[7.0], 0.9), 7.0);
        assert_eq!(quantile_sorted(&[1.0, f64::INFINITY], 0.9), f64::INFINITY);
    }

    #[test]
    fn cholesky_reconstructs_and_tolerates_zero_variance() {
        let a = [4.0, 2.0, 0.0, 2.0, 3.0, 0.0, 0.0, 0.0, 0.0];
        let l = cholesky_psd(&a, 3);
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| l[i * 3 + k] * l[j * 3 + k]).sum();
                assert!((v - a[i * 3 + j]).abs() < 1e-14);
            }
        }
        assert_eq!(l[8], 0.0);
    }
}
