//! Log-density building blocks: data likelihoods, the Gaussian population
//! prior over unit parameters, hyper-priors, and the composite targets used by
//! the two inference stages and by current-unit updating.
//!
//! A unit-level point is laid out as `[θ_1, …, θ_d, σ]`. A hyper-parameter
//! vector is laid out as `[μ_1..μ_d, sd_1..sd_d, μ_σ, sd_σ, (ρ)]`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::degradation::{DegradationModel, LikelihoodKind};
use crate::error::{Error, Result};
use crate::math::{log_mean_exp, log_normal_interval, logsumexp, normal_logpdf, order_invariant_sum, HALF_LN_2PI};
use crate::samplers::{Interval, SampleSet};

/// Log of the mean-matched lognormal density of an observation `y` given the
/// model prediction `pred` and error scale `sigma`.
pub fn lognormal_loglik(y: f64, pred: f64, sigma: f64) -> Result<f64> {
    if !(y > 0.0) || !(pred > 0.0) || !(sigma > 0.0) {
        return Err(Error::invalid(format!(
            "lognormal likelihood needs y, pred, sigma > 0 (got {y}, {pred}, {sigma})"
        )));
    }
    Ok(lognormal_unchecked(y, pred, sigma))
}

#[inline]
fn lognormal_unchecked(y: f64, pred: f64, sigma: f64) -> f64 {
    let r = sigma / pred;
    let zeta2 = (r * r).ln_1p();
    let eta = pred.ln() - 0.5 * zeta2;
    let ly = y.ln();
    let z = ly - eta;
    -ly - HALF_LN_2PI - 0.5 * zeta2.ln() - 0.5 * z * z / zeta2
}

/// Log of the Gaussian density `N(y | pred, sigma²)`.
pub fn gaussian_loglik(y: f64, pred: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::invalid(format!("gaussian likelihood needs sigma > 0 (got {sigma})")));
    }
    Ok(normal_logpdf(y, pred, sigma))
}

/// `log p(D | θ, σ)` summed over all observations, `-inf` whenever the model
/// cannot be evaluated or the point is inadmissible.
pub fn dataset_loglik(model: &dyn DegradationModel, data: &Dataset, point: &[f64]) -> f64 {
    let d = model.theta_dim();
    if point.len() != d + 1 {
        return f64::NEG_INFINITY;
    }
    let (theta, sigma) = (&point[..d], point[d]);
    if !(sigma > 0.0) {
        return f64::NEG_INFINITY;
    }
    let kind = model.likelihood();
    let mut total = 0.0;
    for (&k, &y) in data.cycles().iter().zip(data.values()) {
        let pred = match model.predict(theta, k) {
            Ok(v) if v.is_finite() => v,
            _ => return f64::NEG_INFINITY,
        };
        total += match kind {
            LikelihoodKind::LogNormal if pred > 0.0 && y > 0.0 => lognormal_unchecked(y, pred, sigma),
            LikelihoodKind::LogNormal => return f64::NEG_INFINITY,
            LikelihoodKind::Gaussian => normal_logpdf(y, pred, sigma),
        };
    }
    if total.is_nan() {
        f64::NEG_INFINITY
    } else {
        total
    }
}

/// Diagonal or single-correlation population covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PriorCase {
    #[default]
    #[serde(alias = "diagonal")]
    Diag,
    #[serde(alias = "correlated")]
    Corr,
}

/// Shape of the hyper-parameter vector for a given family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperLayout {
    pub theta_dim: usize,
    pub case: PriorCase,
    /// Upper end of the truncation range of σ.
    pub sigma_upper: f64,
}

impl HyperLayout {
    pub fn new(theta_dim: usize, case: PriorCase, sigma_upper: f64) -> Result<Self> {
        if theta_dim == 0 {
            return Err(Error::invalid("parameter dimension must be positive"));
        }
        if case == PriorCase::Corr && theta_dim != 2 {
            return Err(Error::invalid(format!(
                "correlated case needs a 2-parameter family, this one has {theta_dim}"
            )));
        }
        if !(sigma_upper > 0.0) || !sigma_upper.is_finite() {
            return Err(Error::invalid(format!("sigma truncation bound {sigma_upper} must be positive")));
        }
        Ok(Self { theta_dim, case, sigma_upper })
    }

    pub fn dim(&self) -> usize {
        2 * self.theta_dim + 2 + usize::from(self.case == PriorCase::Corr)
    }

    pub fn labels(&self) -> Vec<String> {
        let d = self.theta_dim;
        let mut l: Vec<String> = (1..=d).map(|j| format!("mu_theta{j}")).collect();
        l.extend((1..=d).map(|j| format!("sd_theta{j}")));
        l.push("mu_sigma".into());
        l.push("sd_sigma".into());
        if self.case == PriorCase::Corr {
            l.push("rho".into());
        }
        l
    }

    /// Unit-level labels `theta1..thetad, sigma`.
    pub fn point_labels(&self) -> Vec<String> {
        let mut l: Vec<String> = (1..=self.theta_dim).map(|j| format!("theta{j}")).collect();
        l.push("sigma".into());
        l
    }

    pub fn unpack(&self, psi: &[f64]) -> Result<HyperParameters> {
        if psi.len() != self.dim() {
            return Err(Error::invalid(format!("hyper vector has {} entries, expected {}", psi.len(), self.dim())));
        }
        let d = self.theta_dim;
        let hp = HyperParameters {
            mu0: psi[..d].to_vec(),
            sd0: psi[d..2 * d].to_vec(),
            mu_sigma: psi[2 * d],
            sd_sigma: psi[2 * d + 1],
            rho: (self.case == PriorCase::Corr).then(|| psi[2 * d + 2]),
        };
        hp.validate()?;
        Ok(hp)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParameters {
    pub mu0: Vec<f64>,
    pub sd0: Vec<f64>,
    pub rho: Option<f64>,
    pub mu_sigma: f64,
    pub sd_sigma: f64,
}

impl HyperParameters {
    pub fn validate(&self) -> Result<()> {
        if self.mu0.len() != self.sd0.len() || self.mu0.is_empty() {
            return Err(Error::invalid("mean and sd vectors must have equal, nonzero length"));
        }
        if self.mu0.iter().any(|v| !v.is_finite()) || self.sd0.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::invalid(format!("population sds must be positive and finite: {:?}", self.sd0)));
        }
        if let Some(r) = self.rho {
            if !(r.abs() < 1.0) {
                return Err(Error::invalid(format!("correlation {r} must satisfy |rho| < 1")));
            }
            if self.mu0.len() != 2 {
                return Err(Error::invalid("correlation is only defined for 2-parameter families"));
            }
        }
        if !(self.mu_sigma >= 0.0) || !(self.sd_sigma > 0.0) || !self.mu_sigma.is_finite() || !self.sd_sigma.is_finite() {
            return Err(Error::invalid(format!(
                "sigma hyper-pair needs mu_sigma >= 0 and sd_sigma > 0 (got {}, {})",
                self.mu_sigma, self.sd_sigma
            )));
        }
        Ok(())
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.mu0.clone();
        v.extend_from_slice(&self.sd0);
        v.push(self.mu_sigma);
        v.push(self.sd_sigma);
        v.extend(self.rho);
        v
    }
}

/// Independent uniform hyper-priors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperPriorBounds {
    pub mu: Vec<Interval>,
    pub sd: Vec<Interval>,
    pub mu_sigma: Interval,
    pub sd_sigma: Interval,
    #[serde(default = "default_rho")]
    pub rho: Interval,
}

fn default_rho() -> Interval {
    Interval::new(-1.0, 1.0)
}

impl HyperPriorBounds {
    /// Defaults for the normalized Paris parameters.
    pub fn crack_default() -> Self {
        Self {
            mu: vec![Interval::new(0.8, 1.4), Interval::new(0.9, 1.4)],
            sd: vec![Interval::new(0.0, 0.3), Interval::new(0.0, 0.1)],
            mu_sigma: Interval::new(0.0, 0.4),
            sd_sigma: Interval::new(0.0, 0.2),
            rho: default_rho(),
        }
    }

    /// Defaults for battery families with `theta_dim` parameters.
    pub fn battery_default(theta_dim: usize) -> Self {
        Self {
            mu: vec![Interval::new(0.0, 1.8); theta_dim],
            sd: vec![Interval::new(0.0, 0.4); theta_dim],
            mu_sigma: Interval::new(0.0, 0.4),
            sd_sigma: Interval::new(0.0, 0.4),
            rho: default_rho(),
        }
    }

    pub fn validate(&self, layout: &HyperLayout) -> Result<()> {
        if self.mu.len() != layout.theta_dim || self.sd.len() != layout.theta_dim {
            return Err(Error::invalid(format!(
                "hyper-prior bounds cover {} parameters, model has {}",
                self.mu.len(),
                layout.theta_dim
            )));
        }
        for iv in self.support(layout) {
            if !(iv.lo < iv.hi) || !iv.is_finite() {
                return Err(Error::invalid(format!("hyper-prior bound [{}, {}] must be finite with lo < hi", iv.lo, iv.hi)));
            }
        }
        Ok(())
    }

    pub fn support(&self, layout: &HyperLayout) -> Vec<Interval> {
        let mut s = self.mu.clone();
        s.extend_from_slice(&self.sd);
        s.push(self.mu_sigma);
        s.push(self.sd_sigma);
        if layout.case == PriorCase::Corr {
            s.push(self.rho);
        }
        s
    }

    /// Log of the product of uniforms; `-inf` outside.
    pub fn log_density(&self, layout: &HyperLayout, psi: &[f64]) -> f64 {
        let mut lp = 0.0;
        for (v, iv) in psi.iter().zip(self.support(layout)) {
            if !iv.contains(*v) {
                return f64::NEG_INFINITY;
            }
            lp -= iv.width().ln();
        }
        lp
    }

    pub fn sample<R: Rng + ?Sized>(&self, layout: &HyperLayout, rng: &mut R) -> Vec<f64> {
        self.support(layout).iter().map(|iv| iv.lo + rng.random::<f64>() * iv.width()).collect()
    }
}

/// The population density `p(θ, σ | ψ)` with per-ψ constants precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorKernel {
    mu: Vec<f64>,
    inv_sd: Vec<f64>,
    rho: Option<f64>,
    theta_const: f64,
    mu_sigma: f64,
    inv_sd_sigma: f64,
    sigma_const: f64,
    sigma_upper: f64,
}

impl PriorKernel {
    pub fn new(psi: &HyperParameters, sigma_upper: f64) -> Result<Self> {
        psi.validate()?;
        let d = psi.mu0.len() as f64;
        let mut theta_const = -d * HALF_LN_2PI - psi.sd0.iter().map(|s| s.ln()).sum::<f64>();
        let rho = psi.rho.filter(|r| *r != 0.0);
        if let Some(r) = rho {
            theta_const -= 0.5 * (-r * r).ln_1p();
        }
        let a = -psi.mu_sigma / psi.sd_sigma;
        let b = (sigma_upper - psi.mu_sigma) / psi.sd_sigma;
        let log_mass = log_normal_interval(a, b);
        if !log_mass.is_finite() {
            return Err(Error::invalid("sigma truncation range carries no probability mass"));
        }
        Ok(Self {
            mu: psi.mu0.clone(),
            inv_sd: psi.sd0.iter().map(|s| 1.0 / s).collect(),
            rho,
            theta_const,
            mu_sigma: psi.mu_sigma,
            inv_sd_sigma: 1.0 / psi.sd_sigma,
            sigma_const: -HALF_LN_2PI - psi.sd_sigma.ln() - log_mass,
            sigma_upper,
        })
    }

    /// Log-density at `[θ…, σ]`; `-inf` when σ is outside `(0, sigma_upper)`.
    pub fn logpdf(&self, point: &[f64]) -> f64 {
        let d = self.mu.len();
        let sigma = point[d];
        if !(sigma > 0.0 && sigma < self.sigma_upper) {
            return f64::NEG_INFINITY;
        }
        let q = match self.rho {
            None => point[..d]
                .iter()
                .zip(&self.mu)
                .zip(&self.inv_sd)
                .map(|((x, m), is)| {
                    let z = (x - m) * is;
                    z * z
                })
                .sum::<f64>(),
            Some(r) => {
                let z1 = (point[0] - self.mu[0]) * self.inv_sd[0];
                let z2 = (point[1] - self.mu[1]) * self.inv_sd[1];
                (z1 * z1 - 2.0 * r * z1 * z2 + z2 * z2) / (1.0 - r * r)
            }
        };
        let zs = (sigma - self.mu_sigma) * self.inv_sd_sigma;
        self.theta_const - 0.5 * q + self.sigma_const - 0.5 * zs * zs
    }

    /// Ancestral draw of `[θ…, σ]`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let d = self.mu.len();
        let mut z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        if let Some(r) = self.rho {
            z[1] = r * z[0] + (1.0 - r * r).sqrt() * z[1];
        }
        let mut point: Vec<f64> = z.iter().zip(&self.mu).zip(&self.inv_sd).map(|((z, m), is)| m + z / is).collect();
        point.push(crate::math::sample_truncated_normal(
            rng,
            self.mu_sigma,
            1.0 / self.inv_sd_sigma,
            0.0,
            self.sigma_upper,
        ));
        point
    }
}

/// `log p(θ, σ | ψ)`: Gaussian over θ plus the truncated-Gaussian σ block.
pub fn hier_prior_logpdf(point: &[f64], psi: &HyperParameters, sigma_upper: f64) -> Result<f64> {
    if point.len() != psi.mu0.len() + 1 {
        return Err(Error::invalid(format!(
            "point has {} entries, expected {}",
            point.len(),
            psi.mu0.len() + 1
        )));
    }
    Ok(PriorKernel::new(psi, sigma_upper)?.logpdf(point))
}

/// Stage-2 target: uniform hyper-prior times the Monte-Carlo marginal
/// likelihood built from stage-1 posterior draws.
pub struct HyperTarget<'a> {
    layout: HyperLayout,
    bounds: HyperPriorBounds,
    stage1: &'a [SampleSet],
}

impl<'a> HyperTarget<'a> {
    pub fn new(layout: HyperLayout, bounds: HyperPriorBounds, stage1: &'a [SampleSet]) -> Result<Self> {
        bounds.validate(&layout)?;
        if stage1.is_empty() {
            return Err(Error::invalid("stage-2 needs at least one stage-1 sample set"));
        }
        for s in stage1 {
            if s.is_empty() {
                return Err(Error::invalid("empty stage-1 sample set"));
            }
            if s.dim() != layout.theta_dim + 1 {
                return Err(Error::invalid(format!(
                    "stage-1 sample set has dimension {}, expected {}",
                    s.dim(),
                    layout.theta_dim + 1
                )));
            }
        }
        Ok(Self { layout, bounds, stage1 })
    }

    pub fn layout(&self) -> &HyperLayout {
        &self.layout
    }

    pub fn bounds(&self) -> &HyperPriorBounds {
        &self.bounds
    }

    pub fn log_prior(&self, psi: &[f64]) -> f64 {
        self.bounds.log_density(&self.layout, psi)
    }

    /// Sum over datasets of `ln mean_k p(θ_i^(k) | ψ)`; summed in sorted
    /// order so that dataset permutations give bit-identical results.
    pub fn log_likelihood(&self, psi: &[f64]) -> f64 {
        let Ok(hp) = self.layout.unpack(psi) else {
            return f64::NEG_INFINITY;
        };
        let Ok(kernel) = PriorKernel::new(&hp, self.layout.sigma_upper) else {
            return f64::NEG_INFINITY;
        };
        let mut terms: Vec<f64> = self
            .stage1
            .iter()
            .map(|s| {
                let lp: Vec<f64> = s.rows().map(|r| kernel.logpdf(r)).collect();
                log_mean_exp(&lp)
            })
            .collect();
        if terms.iter().any(|t| *t == f64::NEG_INFINITY || t.is_nan()) {
            return f64::NEG_INFINITY;
        }
        order_invariant_sum(&mut terms)
    }

    pub fn log_target(&self, psi: &[f64]) -> f64 {
        let lp = self.log_prior(psi);
        if lp == f64::NEG_INFINITY {
            return lp;
        }
        lp + self.log_likelihood(psi)
    }
}

/// `hyper_posterior_logtarget` as a free function.
pub fn hyper_posterior_logtarget(
    psi: &[f64],
    stage1: &[SampleSet],
    layout: &HyperLayout,
    bounds: &HyperPriorBounds,
) -> Result<f64> {
    Ok(HyperTarget::new(*layout, bounds.clone(), stage1)?.log_target(psi))
}

/// Equal-weight mixture of population densities over hyper-posterior draws.
#[derive(Debug, Clone)]
pub struct MixturePrior {
    kernels: Vec<PriorKernel>,
    log_n: f64,
    theta_dim: usize,
}

impl MixturePrior {
    pub fn new(hyper: &SampleSet, layout: &HyperLayout) -> Result<Self> {
        if hyper.is_empty() {
            return Err(Error::invalid("mixture prior needs at least one hyper sample"));
        }
        if hyper.dim() != layout.dim() {
            return Err(Error::invalid(format!(
                "hyper sample set has dimension {}, layout expects {}",
                hyper.dim(),
                layout.dim()
            )));
        }
        let kernels = hyper
            .rows()
            .map(|r| PriorKernel::new(&layout.unpack(r)?, layout.sigma_upper))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { log_n: (kernels.len() as f64).ln(), kernels, theta_dim: layout.theta_dim })
    }

    pub fn len(&self) -> usize {
        self.kernels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernels.is_empty()
    }

    pub fn theta_dim(&self) -> usize {
        self.theta_dim
    }

    pub fn logpdf(&self, point: &[f64]) -> f64 {
        if point.len() != self.theta_dim + 1 {
            return f64::NEG_INFINITY;
        }
        let terms: Vec<f64> = self.kernels.iter().map(|k| k.logpdf(point)).collect();
        logsumexp(&terms) - self.log_n
    }

    /// Ancestral draw: a uniformly chosen component, then its Gaussian.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let s = rng.random_range(0..self.kernels.len());
        self.kernels[s].sample(rng)
    }
}

/// `mixture_prior_logpdf` as a free function.
pub fn mixture_prior_logpdf(point: &[f64], hyper: &SampleSet, layout: &HyperLayout) -> Result<f64> {
    Ok(MixturePrior::new(hyper, layout)?.logpdf(point))
}

/// Current-unit target: data log-likelihood plus the mixture prior.
pub fn current_posterior_logtarget(
    point: &[f64],
    current: &Dataset,
    prior: &MixturePrior,
    model: &dyn DegradationModel,
) -> f64 {
    let lp = prior.logpdf(point);
    if lp == f64::NEG_INFINITY || lp.is_nan() {
        return f64::NEG_INFINITY;
    }
    lp + dataset_loglik(model, current, point)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn psi2(rho: Option<f64>) -> HyperParameters {
        HyperParameters { mu0: vec![1.0, 1.05], sd0: vec![0.1, 0.03], rho, mu_sigma: 0.05, sd_sigma: 0.04 }
    }

    #[test]
    fn gaussian_unit_residual() {
        let v = gaussian_loglik(2.0, 1.0, 1.0).unwrap();
        assert!((v - (-1.418_938_533_204_672_7)).abs() < 1e-14);
        assert_eq!(gaussian_loglik(1.3, 1.0, 0.2).unwrap(), gaussian_loglik(0.7, 1.0, 0.2).unwrap());
        assert!(gaussian_loglik(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn lognormal_domain_errors() {
        assert!(lognormal_loglik(0.0, 1.0, 0.1).is_err());
        assert!(lognormal_loglik(1.0, -1.0, 0.1).is_err());
        assert!(lognormal_loglik(1.0, 1.0, 0.0).is_err());
        assert!(lognormal_loglik(20.0, 20.0, 1.0).unwrap().is_finite());
    }

    #[test]
    fn diagonal_prior_factorizes() {
        let psi = psi2(None);
        let point = [0.93, 1.1, 0.07];
        let v = hier_prior_logpdf(&point, &psi, 0.2).unwrap();
        let trunc = log_normal_interval(-0.05 / 0.04, 0.15 / 0.04);
        let expect = normal_logpdf(0.93, 1.0, 0.1) + normal_logpdf(1.1, 1.05, 0.03) + normal_logpdf(0.07, 0.05, 0.04)
            - trunc;
        assert!((v - expect).abs() < 1e-12);
    }

    #[test]
    fn sigma_outside_truncation_is_rejected() {
        let psi = psi2(Some(0.3));
        assert_eq!(hier_prior_logpdf(&[1.0, 1.0, 0.25], &psi, 0.2).unwrap(), f64::NEG_INFINITY);
        assert_eq!(hier_prior_logpdf(&[1.0, 1.0, 0.0], &psi, 0.2).unwrap(), f64::NEG_INFINITY);
        assert!(hier_prior_logpdf(&[1.0, 1.0, 0.1], &psi2(Some(1.0)), 0.2).is_err());
    }

    #[test]
    fn layout_rejects_corr_for_battery() {
        assert!(HyperLayout::new(4, PriorCase::Corr, 0.4).is_err());
        let l = HyperLayout::new(2, PriorCase::Corr, 0.2).unwrap();
        assert_eq!(l.dim(), 7);
        assert_eq!(l.labels().last().unwrap(), "rho");
        let psi = psi2(Some(0.4));
        assert_eq!(l.unpack(&psi.to_vec()).unwrap(), psi);
    }

    #[test]
    fn kernel_sample_moments() {
        use rand::SeedableRng;
        let k = PriorKernel::new(&psi2(Some(0.6)), 0.2).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let draws: Vec<Vec<f64>> = (0..20_000).map(|_| k.sample(&mut rng)).collect();
        let s = SampleSet::from_rows(vec!["a".into(), "b".into(), "s".into()], &draws).unwrap();
        let m = s.mean();
        assert!((m[0] - 1.0).abs() < 0.005 && (m[1] - 1.05).abs() < 0.0015);
        let c = s.covariance();
        let corr = c[1] / (c[0] * c[4]).sqrt();
        assert!((corr - 0.6).abs() < 0.03, "corr {corr}");
        assert!(s.column(2).iter().all(|v| *v > 0.0 && *v < 0.2));
    }
}
