//! Paris-law fatigue crack growth, `da/dN = C (Δσ √(π a))^m`, in closed form.
//!
//! Parameters are carried in normalized form: `θ₁ = m / m₀` and
//! `θ₂ = ln C / ln C₀`.

use serde::{Deserialize, Serialize};

use super::{Crossing, DataKind, DegradationModel, Eol, LikelihoodKind, ModelError};

/// Half-width of the band around `m = 2` where the exponential branch is used.
pub const M_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrackNominals {
    pub m0: f64,
    /// Natural-log scale.
    pub log_c0: f64,
}

impl Default for CrackNominals {
    fn default() -> Self {
        Self { m0: 2.0, log_c0: -18.6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrackParams {
    pub theta1: f64,
    pub theta2: f64,
    pub nominal: CrackNominals,
}

impl CrackParams {
    pub fn new(theta1: f64, theta2: f64, nominal: CrackNominals) -> Result<Self, ModelError> {
        let p = Self { theta1, theta2, nominal };
        if !(theta1 > 0.0) || !p.m().is_finite() {
            return Err(ModelError::InvalidParameter(format!("theta1 = {theta1} must be positive and finite")));
        }
        if p.log_c().is_nan() {
            return Err(ModelError::InvalidParameter(format!("theta2 = {theta2} gives undefined log C")));
        }
        Ok(p)
    }

    /// Builds from physical `m` and `ln C`.
    pub fn from_physical(m: f64, log_c: f64, nominal: CrackNominals) -> Result<Self, ModelError> {
        Self::new(m / nominal.m0, log_c / nominal.log_c0, nominal)
    }

    pub fn m(&self) -> f64 {
        self.theta1 * self.nominal.m0
    }

    pub fn log_c(&self) -> f64 {
        self.theta2 * self.nominal.log_c0
    }

    pub fn c(&self) -> f64 {
        self.log_c().exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum LoadingSpec {
    Constant {
        /// Stress amplitude, MPa.
        delta_sigma: f64,
    },
    TwoBlock {
        delta_sigma1: f64,
        n1: f64,
        delta_sigma2: f64,
        n2: f64,
    },
}

impl LoadingSpec {
    pub fn validate(&self) -> Result<(), ModelError> {
        let ok = match *self {
            LoadingSpec::Constant { delta_sigma } => delta_sigma > 0.0 && delta_sigma.is_finite(),
            LoadingSpec::TwoBlock { delta_sigma1, n1, delta_sigma2, n2 } => {
                delta_sigma1 > 0.0 && delta_sigma2 > 0.0 && n1 >= 0.0 && n2 >= 0.0 && n1 + n2 > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(ModelError::InvalidParameter(format!("inadmissible loading {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrackGeometry {
    /// Initial crack length (mm) observed at cycle `n0`.
    pub a0: f64,
    pub n0: f64,
    /// Critical crack length (mm).
    pub a_f: f64,
}

impl CrackGeometry {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.a0 > 0.0 && self.a0 < self.a_f && self.n0 >= 0.0 && self.a_f.is_finite() {
            Ok(())
        } else {
            Err(ModelError::InvalidParameter(format!("inadmissible crack geometry {self:?}")))
        }
    }
}

/// Power-mean equivalent amplitude of a loading spectrum for Paris exponent `m`.
pub fn equivalent_stress(loading: &LoadingSpec, m: f64) -> Result<f64, ModelError> {
    match *loading {
        LoadingSpec::Constant { delta_sigma } => Ok(delta_sigma),
        LoadingSpec::TwoBlock { delta_sigma1, n1, delta_sigma2, n2 } => {
            loading.validate()?;
            if m == 0.0 || !m.is_finite() {
                return Err(ModelError::InvalidParameter(format!(
                    "power mean undefined for exponent m = {m}"
                )));
            }
            // in log space so large m cannot overflow the powers
            let (l1, l2) = (delta_sigma1.ln(), delta_sigma2.ln());
            let lmax = if m > 0.0 { l1.max(l2) } else { l1.min(l2) };
            let mut acc = 0.0;
            if n1 > 0.0 {
                acc += n1 * (m * (l1 - lmax)).exp();
            }
            if n2 > 0.0 {
                acc += n2 * (m * (l2 - lmax)).exp();
            }
            let v = (lmax + (acc / (n1 + n2)).ln() / m).exp();
            // keep the power-mean bounds exact under rounding
            let (lo, hi) = if n1 == 0.0 {
                (delta_sigma2, delta_sigma2)
            } else if n2 == 0.0 {
                (delta_sigma1, delta_sigma1)
            } else {
                (delta_sigma1.min(delta_sigma2), delta_sigma1.max(delta_sigma2))
            };
            Ok(v.clamp(lo, hi))
        }
    }
}

/// `ln K` with `K = C (Δσ_eq √π)^m`, the growth-rate prefactor.
fn log_rate(params: &CrackParams, loading: &LoadingSpec) -> Result<f64, ModelError> {
    let m = params.m();
    let ds = equivalent_stress(loading, m)?;
    Ok(params.log_c() + m * (ds * std::f64::consts::PI.sqrt()).ln())
}

/// Crack length (mm) after `n` cycles.
///
/// Uses the form obtained by integrating the rate law, exponent `e = 1 - m/2`:
/// `a = (a₀^e + e K (N - N₀))^(1/e)`. Inside `|m - 2| < M_TOL` the exponential
/// limit `a₀ exp(K ΔN)` is used with its first-order correction in `e`.
pub fn crack_length(
    params: &CrackParams,
    geometry: &CrackGeometry,
    loading: &LoadingSpec,
    n: f64,
) -> Result<f64, ModelError> {
    if !(n >= geometry.n0) {
        return Err(ModelError::BelowDomain { cycle: n });
    }
    let dn = n - geometry.n0;
    if dn == 0.0 {
        return Ok(geometry.a0);
    }
    let log_k = log_rate(params, loading)?;
    let k = log_k.exp();
    if k == 0.0 {
        return Ok(geometry.a0);
    }
    if !k.is_finite() {
        return Err(ModelError::Diverged { cycle: n });
    }
    let l0 = geometry.a0.ln();
    let e = 1.0 - params.m() / 2.0;
    let x = k * dn;
    let ln_a = if (params.m() - 2.0).abs() < M_TOL {
        l0 + x - e * x * (l0 + 0.5 * x)
    } else {
        // u = a^e - 1
        let u = (e * l0).exp_m1() + e * x;
        if !(u > -1.0) {
            return Err(ModelError::Diverged { cycle: n });
        }
        u.ln_1p() / e
    };
    let a = ln_a.exp();
    if a.is_finite() {
        Ok(a)
    } else {
        Err(ModelError::Diverged { cycle: n })
    }
}

/// Cycle at which the crack reaches `target` (mm), by inverting [`crack_length`].
pub fn cycles_to_length(
    params: &CrackParams,
    geometry: &CrackGeometry,
    loading: &LoadingSpec,
    target: f64,
) -> Result<f64, ModelError> {
    if target <= geometry.a0 {
        return Ok(geometry.n0);
    }
    let log_k = log_rate(params, loading)?;
    let k = log_k.exp();
    if !(k > 0.0) || !k.is_finite() {
        return Err(ModelError::NoFiniteFailure(format!("growth prefactor K = {k}")));
    }
    let l0 = geometry.a0.ln();
    let lf = target.ln();
    let e = 1.0 - params.m() / 2.0;
    let x = if (params.m() - 2.0).abs() < M_TOL {
        // solve lf - l0 = x (1 - e l0) - (e/2) x² for the small root
        let d = lf - l0;
        let b = 1.0 - e * l0;
        let disc = b * b - 2.0 * e * d;
        if disc < 0.0 {
            return Err(ModelError::NoFiniteFailure("no real root near m = 2".into()));
        }
        2.0 * d / (b + disc.sqrt())
    } else {
        ((e * lf).exp_m1() - (e * l0).exp_m1()) / e
    };
    let n = geometry.n0 + x / k;
    if n.is_finite() {
        Ok(n)
    } else {
        Err(ModelError::NoFiniteFailure(format!("cycles to failure overflowed (x = {x}, K = {k})")))
    }
}

/// Cycle count at which the crack reaches the critical length `a_f`.
pub fn cycles_to_failure(
    params: &CrackParams,
    geometry: &CrackGeometry,
    loading: &LoadingSpec,
) -> Result<f64, ModelError> {
    cycles_to_length(params, geometry, loading, geometry.a_f)
}

/// Paris-law model bound to one specimen's geometry and loading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParisModel {
    pub nominal: CrackNominals,
    pub geometry: CrackGeometry,
    pub loading: LoadingSpec,
}

impl ParisModel {
    pub fn new(nominal: CrackNominals, geometry: CrackGeometry, loading: LoadingSpec) -> Result<Self, ModelError> {
        geometry.validate()?;
        loading.validate()?;
        Ok(Self { nominal, geometry, loading })
    }

    fn params(&self, theta: &[f64]) -> Result<CrackParams, ModelError> {
        match theta {
            [t1, t2] => CrackParams::new(*t1, *t2, self.nominal),
            _ => Err(ModelError::Dimension { expected: 2, got: theta.len() }),
        }
    }
}

impl DegradationModel for ParisModel {
    fn name(&self) -> &str {
        "paris"
    }

    fn kind(&self) -> DataKind {
        DataKind::Crack
    }

    fn theta_labels(&self) -> Vec<String> {
        vec!["theta1".into(), "theta2".into()]
    }

    fn nominals(&self) -> Vec<f64> {
        vec![self.nominal.m0, self.nominal.log_c0]
    }

    fn likelihood(&self) -> LikelihoodKind {
        LikelihoodKind::LogNormal
    }

    fn crossing(&self) -> Crossing {
        Crossing::Upward
    }

    fn predict(&self, theta: &[f64], cycle: f64) -> Result<f64, ModelError> {
        crack_length(&self.params(theta)?, &self.geometry, &self.loading, cycle)
    }

    fn end_of_life(&self, theta: &[f64], threshold: f64, _t_c: f64, horizon: f64) -> Result<Eol, ModelError> {
        let p = self.params(theta)?;
        match cycles_to_length(&p, &self.geometry, &self.loading, threshold) {
            Ok(n) if n <= horizon => Ok(Eol::At(n)),
            Ok(_) | Err(ModelError::NoFiniteFailure(_)) => Ok(Eol::Censored),
            Err(e) => Err(e),
        }
    }
}
