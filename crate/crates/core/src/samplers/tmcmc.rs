use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{
    derive_seed, rng_from_seed, LogEvidence, Provenance, SampleSet, SamplerConfig, SamplerError, SamplerRng,
};
use crate::math::cholesky_psd;

type SampleFn<'a> = Box<dyn Fn(&mut SamplerRng) -> Vec<f64> + Send + Sync + 'a>;
type LogFn<'a> = Box<dyn Fn(&[f64]) -> f64 + Send + Sync + 'a>;

/// A Bayesian problem split into a samplable prior and a log-likelihood.
///
/// `log_prior` may be unnormalized; it only enters Metropolis ratios. The
/// evidence refers to the prior that `prior_sample` draws from.
pub struct TmcmcProblem<'a> {
    pub id: String,
    pub labels: Vec<String>,
    prior_sample: SampleFn<'a>,
    log_prior: LogFn<'a>,
    log_likelihood: LogFn<'a>,
}

impl<'a> TmcmcProblem<'a> {
    pub fn new(
        id: impl Into<String>,
        labels: Vec<String>,
        prior_sample: impl Fn(&mut SamplerRng) -> Vec<f64> + Send + Sync + 'a,
        log_prior: impl Fn(&[f64]) -> f64 + Send + Sync + 'a,
        log_likelihood: impl Fn(&[f64]) -> f64 + Send + Sync + 'a,
    ) -> Self {
        Self {
            id: id.into(),
            labels,
            prior_sample: Box::new(prior_sample),
            log_prior: Box::new(log_prior),
            log_likelihood: Box::new(log_likelihood),
        }
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    fn eval(&self, x: &[f64]) -> (f64, f64) {
        let lp = nan_to_neg_inf((self.log_prior)(x));
        if lp == f64::NEG_INFINITY {
            return (lp, f64::NEG_INFINITY);
        }
        (lp, nan_to_neg_inf((self.log_likelihood)(x)))
    }
}

fn nan_to_neg_inf(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// Output of a TMCMC run.
#[derive(Debug, Clone, PartialEq)]
pub struct TmcmcRun {
    /// Final-stage particles; `log_evidence` is also attached to the set.
    pub samples: SampleSet,
    pub betas: Vec<f64>,
    pub log_evidence: LogEvidence,
}

#[derive(Clone)]
struct Particle {
    x: Vec<f64>,
    log_prior: f64,
    log_lik: f64,
}

const PRIOR_ATTEMPTS: usize = 100;

/// Transitional MCMC with log-evidence estimate.
pub fn tmcmc(problem: &TmcmcProblem<'_>, config: &SamplerConfig) -> Result<TmcmcRun, SamplerError> {
    config.validate()?;
    let tc = &config.tmcmc;
    let n = tc.stage_size.unwrap_or(config.n_samples);
    let dim = problem.dim();

    let mut rng = rng_from_seed(config.seed);
    let draws: Vec<Vec<f64>> = (0..n).map(|_| (problem.prior_sample)(&mut rng)).collect();
    let mut particles: Vec<Particle> = draws
        .into_par_iter()
        .enumerate()
        .map(|(i, mut x)| {
            let mut local = rng_from_seed(derive_seed(config.seed, u64::MAX, i as u64));
            for _ in 0..PRIOR_ATTEMPTS {
                if x.len() != dim {
                    return Err(SamplerError::Dimension { expected: dim, got: x.len() });
                }
                let (log_prior, log_lik) = problem.eval(&x);
                if log_prior.is_finite() {
                    return Ok(Particle { x, log_prior, log_lik });
                }
                x = (problem.prior_sample)(&mut local);
            }
            Err(SamplerError::NoValidPoint { attempts: PRIOR_ATTEMPTS })
        })
        .collect::<Result<_, _>>()?;

    let mut beta = 0.0;
    let mut betas = vec![0.0];
    let mut log_z = 0.0;
    let mut cov_sq_sum = 0.0;
    for stage in 1..=tc.max_stages {
        let ll: Vec<f64> = particles.iter().map(|p| p.log_lik).collect();
        let ll_max = ll.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if ll_max == f64::NEG_INFINITY {
            return Err(SamplerError::NoValidPoint { attempts: n });
        }
        let d_beta = next_increment(&ll, ll_max, 1.0 - beta, tc.target_cov);
        let next = if d_beta >= 1.0 - beta { 1.0 } else { beta + d_beta };
        if !(next > beta) {
            return Err(SamplerError::NonIncreasingBeta { stage, beta });
        }
        let d_beta = next - beta;
        let w: Vec<f64> = ll.iter().map(|&l| (d_beta * (l - ll_max)).exp()).collect();
        let sum_w: f64 = w.iter().sum();
        let sum_w2: f64 = w.iter().map(|v| v * v).sum();
        let ess = sum_w * sum_w / sum_w2;
        if !(ess >= 2.0) {
            return Err(SamplerError::TemperingCollapse { stage, beta: next, ess });
        }
        let mean_w = sum_w / n as f64;
        log_z += d_beta * ll_max + mean_w.ln();
        cov_sq_sum += coefficient_of_variation(&w).powi(2);
        beta = next;
        betas.push(beta);

        let weights: Vec<f64> = w.iter().map(|v| v / sum_w).collect();
        let chol = proposal_factor(&particles, &weights, dim, tc.proposal_scale);
        let picks = systematic_resample(&weights, n, &mut rng);
        particles = picks
            .into_par_iter()
            .enumerate()
            .map(|(i, src)| {
                let mut local = rng_from_seed(derive_seed(config.seed, stage as u64, i as u64));
                metropolis(problem, particles[src].clone(), &chol, beta, tc.mcmc_steps, &mut local)
            })
            .collect();

        if beta >= 1.0 {
            let data = particles.iter().flat_map(|p| p.x.iter().copied()).collect();
            let log_evidence = LogEvidence { value: log_z, std_error: (cov_sq_sum / n as f64).sqrt() };
            let mut samples = SampleSet::from_flat(problem.labels.clone(), data)?.with_provenance(Provenance {
                target: problem.id.clone(),
                sampler: "tmcmc".into(),
                config_hash: config.fingerprint(),
                seed: config.seed,
            });
            samples.log_evidence = Some(log_evidence);
            return Ok(TmcmcRun { samples, betas, log_evidence });
        }
    }
    Err(SamplerError::InvalidConfig(format!("tempering did not reach beta = 1 within {} stages", tc.max_stages)))
}

fn coefficient_of_variation(w: &[f64]) -> f64 {
    let n = w.len() as f64;
    let mean = w.iter().sum::<f64>() / n;
    let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    var.sqrt() / mean
}

/// Largest tempering increment (up to `max_step`) whose weight CoV stays at
/// or below the target, by bisection.
fn next_increment(ll: &[f64], ll_max: f64, max_step: f64, target_cov: f64) -> f64 {
    let cov_at = |db: f64| {
        let w: Vec<f64> = ll.iter().map(|&l| (db * (l - ll_max)).exp()).collect();
        coefficient_of_variation(&w)
    };
    if cov_at(max_step) <= target_cov {
        return max_step;
    }
    let (mut lo, mut hi) = (0.0, max_step);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if cov_at(mid) <= target_cov {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    // the CoV can exceed the target for every positive step when some particles
    // have zero likelihood; fall back to the smallest step bisection reached
    if lo > 0.0 {
        lo
    } else {
        hi
    }
}

fn proposal_factor(particles: &[Particle], weights: &[f64], dim: usize, scale: f64) -> Vec<f64> {
    let mut mean = vec![0.0; dim];
    for (p, w) in particles.iter().zip(weights) {
        for (m, x) in mean.iter_mut().zip(&p.x) {
            *m += w * x;
        }
    }
    let mut cov = vec![0.0; dim * dim];
    for (p, w) in particles.iter().zip(weights) {
        for i in 0..dim {
            let di = p.x[i] - mean[i];
            for j in 0..=i {
                cov[i * dim + j] += w * di * (p.x[j] - mean[j]);
            }
        }
    }
    let s2 = scale * scale;
    for i in 0..dim {
        for j in 0..=i {
            cov[i * dim + j] *= s2;
            cov[j * dim + i] = cov[i * dim + j];
        }
    }
    cholesky_psd(&cov, dim)
}

fn systematic_resample(weights: &[f64], n: usize, rng: &mut SamplerRng) -> Vec<usize> {
    let u0: f64 = rng.random::<f64>() / n as f64;
    let mut picks = Vec::with_capacity(n);
    let mut cum = weights[0];
    let mut j = 0;
    for k in 0..n {
        let u = u0 + k as f64 / n as f64;
        while u > cum && j + 1 < weights.len() {
            j += 1;
            cum += weights[j];
        }
        picks.push(j);
    }
    picks
}

fn metropolis(
    problem: &TmcmcProblem<'_>,
    mut current: Particle,
    chol: &[f64],
    beta: f64,
    steps: usize,
    rng: &mut SamplerRng,
) -> Particle {
    let dim = current.x.len();
    let mut z = vec![0.0; dim];
    let mut proposal = vec![0.0; dim];
    for _ in 0..steps {
        z.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
        for i in 0..dim {
            let shift: f64 = (0..=i).map(|k| chol[i * dim + k] * z[k]).sum();
            proposal[i] = current.x[i] + shift;
        }
        let (lp, ll) = problem.eval(&proposal);
        let u: f64 = rng.random();
        if lp == f64::NEG_INFINITY {
            continue;
        }
        let log_ratio = (lp + beta * ll) - (current.log_prior + beta * current.log_lik);
        if u.ln() < log_ratio {
            current.x.copy_from_slice(&proposal);
            current.log_prior = lp;
            current.log_lik = ll;
        }
    }
    current
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::normal_logpdf;

    fn conjugate(shift: f64) -> TmcmcProblem<'static> {
        TmcmcProblem::new(
            "conjugate",
            vec!["mu".into()],
            |rng| vec![rng.sample(StandardNormal)],
            |x| normal_logpdf(x[0], 0.0, 1.0),
            move |x| normal_logpdf(1.0, x[0], 1.0) + shift,
        )
    }

    fn small(seed: u64) -> SamplerConfig {
        SamplerConfig::default().with_samples(2000).with_seed(seed)
    }

    #[test]
    fn flat_likelihood_has_zero_evidence() {
        let p = TmcmcProblem::new(
            "flat",
            vec!["x".into()],
            |rng| vec![rng.random::<f64>()],
            |x| if (0.0..=1.0).contains(&x[0]) { 0.0 } else { f64::NEG_INFINITY },
            |_| 0.0,
        );
        let run = tmcmc(&p, &small(1)).unwrap();
        assert!(run.log_evidence.value.abs() < 1e-10);
        assert_eq!(run.betas, vec![0.0, 1.0]);
        let (m, _) = crate::math::mean_var(&run.samples.column(0));
        assert!((m - 0.5).abs() < 0.03);
    }

    #[test]
    fn conjugate_evidence_and_posterior_mean() {
        let exact = normal_logpdf(1.0, 0.0, 2f64.sqrt());
        let run = tmcmc(&conjugate(0.0), &small(4)).unwrap();
        assert!((run.log_evidence.value - exact).abs() < 0.1, "{} vs {exact}", run.log_evidence.value);
        let col = run.samples.column(0);
        let (m, v) = crate::math::mean_var(&col);
        assert!((m - 0.5).abs() < 3.0 * (v / col.len() as f64).sqrt() + 0.02, "posterior mean {m}");
    }

    #[test]
    fn betas_increase_to_one() {
        let p = TmcmcProblem::new(
            "sharp",
            vec!["mu".into()],
            |rng| vec![rng.sample(StandardNormal)],
            |x| normal_logpdf(x[0], 0.0, 1.0),
            |x| normal_logpdf(0.3, x[0], 0.01),
        );
        let run = tmcmc(&p, &small(2)).unwrap();
        assert!(run.betas.len() > 2);
        assert!(run.betas.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(*run.betas.last().unwrap(), 1.0);
    }

    #[test]
    fn evidence_shifts_with_likelihood_constant() {
        let a = tmcmc(&conjugate(0.0), &small(8)).unwrap();
        let b = tmcmc(&conjugate(25.0), &small(8)).unwrap();
        assert!((b.log_evidence.value - a.log_evidence.value - 25.0).abs() < 1e-8);
    }

    #[test]
    fn deterministic_given_seed() {
        let a = tmcmc(&conjugate(0.0), &small(3)).unwrap();
        let b = tmcmc(&conjugate(0.0), &small(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn all_zero_likelihood_is_an_error() {
        let p = TmcmcProblem::new(
            "void",
            vec!["x".into()],
            |rng| vec![rng.random::<f64>()],
            |_| 0.0,
            |_| f64::NEG_INFINITY,
        );
        assert!(tmcmc(&p, &small(1)).is_err());
    }
}
