//! Two-stage hierarchical inference: per-dataset posteriors, the
//! hyper-posterior, current-unit updating, a single-level baseline with a
//! Gaussian prior, and evidence-based model selection.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::degradation::{DataKind, DegradationModel, LikelihoodKind, ModelFamily};
use crate::error::{Error, Result};
use crate::math::normal_logpdf;
use crate::samplers::{
    derive_seed, fingerprint_json, rng_from_seed, slice_sample, slice_sample_whitened, tmcmc, Interval, LogEvidence, Provenance, SampleSet,
    SamplerConfig, SamplerError, TargetSpec, TmcmcProblem,
};
use crate::targets::{
    current_posterior_logtarget, dataset_loglik, HyperLayout, HyperPriorBounds, HyperTarget, MixturePrior,
};

const INIT_DRAWS: usize = 256;
const INIT_MAX_ATTEMPTS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    #[default]
    Slice,
    Tmcmc,
}

/// Default stage-1 uniform support `[θ…, σ]` for a family. Battery families
/// have none: their bounds must come from configuration.
pub fn default_stage1_bounds(family: &ModelFamily) -> Option<Vec<Interval>> {
    match family {
        ModelFamily::Paris { .. } => {
            Some(vec![Interval::new(0.5, 2.5), Interval::new(0.7, 1.5), Interval::new(0.0, 0.2)])
        }
        _ => None,
    }
}

/// Default hyper-prior bounds for a family.
pub fn default_hyper_bounds(family: &ModelFamily) -> HyperPriorBounds {
    match family {
        ModelFamily::Paris { .. } => HyperPriorBounds::crack_default(),
        f => HyperPriorBounds::battery_default(f.theta_dim()),
    }
}

/// Default truncation bound of σ for a physics.
pub fn default_sigma_upper(kind: DataKind) -> f64 {
    match kind {
        DataKind::Crack => 0.2,
        DataKind::Battery => 0.4,
    }
}

fn check_likelihood(model: &dyn DegradationModel, data: &Dataset) -> Result<()> {
    let expected = match data.meta.kind {
        DataKind::Crack => LikelihoodKind::LogNormal,
        DataKind::Battery => LikelihoodKind::Gaussian,
    };
    if model.kind() != data.meta.kind || model.likelihood() != expected {
        return Err(Error::invalid(format!(
            "model {} ({:?}) does not match {:?} data in {}",
            model.name(),
            model.likelihood(),
            data.meta.kind,
            data.id
        )));
    }
    Ok(())
}

fn check_bounds(bounds: &[Interval], dim: usize) -> Result<()> {
    if bounds.len() != dim {
        return Err(Error::invalid(format!("{} support bounds given, expected {dim}", bounds.len())));
    }
    for b in bounds {
        if !b.is_finite() || b.lo > b.hi {
            return Err(Error::invalid(format!("support bound [{}, {}] must be finite with lo <= hi", b.lo, b.hi)));
        }
    }
    Ok(())
}

fn uniform_point<R: Rng + ?Sized>(bounds: &[Interval], rng: &mut R) -> Vec<f64> {
    bounds
        .iter()
        .map(|b| if b.lo == b.hi { b.lo } else { b.lo + rng.random::<f64>() * b.width() })
        .collect()
}

/// Best of a batch of candidate starts; keeps drawing until one is finite.
fn best_start<R, F, G>(rng: &mut R, mut draw: G, log_target: F) -> Result<Vec<f64>>
where
    R: Rng + ?Sized,
    F: Fn(&[f64]) -> f64,
    G: FnMut(&mut R) -> Vec<f64>,
{
    let mut best: Option<(f64, Vec<f64>)> = None;
    for attempt in 0..INIT_MAX_ATTEMPTS {
        if attempt >= INIT_DRAWS && best.is_some() {
            break;
        }
        let x = draw(rng);
        let v = log_target(&x);
        if v.is_finite() && best.as_ref().is_none_or(|(b, _)| v > *b) {
            best = Some((v, x));
        }
    }
    best.map(|(_, x)| x).ok_or(Error::Sampler(SamplerError::NoValidPoint { attempts: INIT_MAX_ATTEMPTS }))
}

/// Stage 1: posterior of `[θ…, σ]` for one dataset under a uniform prior on
/// `bounds`, by slice sampling.
pub fn stage1_infer(
    dataset: &Dataset,
    model: &dyn DegradationModel,
    bounds: &[Interval],
    config: &SamplerConfig,
) -> Result<SampleSet> {
    if dataset.is_empty() {
        return Err(Error::invalid(format!("dataset {} is empty", dataset.id)));
    }
    check_likelihood(model, dataset)?;
    let dim = model.theta_dim() + 1;
    check_bounds(bounds, dim)?;
    let labels = point_labels(model);
    let target = TargetSpec::new(format!("stage1:{}:{}", dataset.id, model.name()), labels, |x| {
        dataset_loglik(model, dataset, x)
    })
    .with_support(bounds.to_vec());
    let problem = stage1_problem(dataset, model, bounds);
    if let Some((init, cov)) = pilot(&problem, |x| target.log_density(x), config.seed) {
        return Ok(slice_sample_whitened(&target, &init, &cov, config)?);
    }
    let mut rng = rng_from_seed(derive_seed(config.seed, 0x1a17, 0));
    let init = best_start(&mut rng, |r| uniform_point(bounds, r), |x| target.log_density(x))?;
    Ok(slice_sample(&target, &init, config)?)
}

const PILOT_PARTICLES: usize = 256;

/// Short tempered run ahead of slice sampling. Returns the particle with the
/// highest log-target and the particle covariance, used as the chain's start
/// and whitening scale. `None` if the run fails or finds no finite point.
fn pilot(problem: &TmcmcProblem<'_>, log_target: impl Fn(&[f64]) -> f64, seed: u64) -> Option<(Vec<f64>, Vec<f64>)> {
    let config = SamplerConfig::default().with_samples(PILOT_PARTICLES).with_seed(derive_seed(seed, 0x1a17, 1));
    let run = tmcmc(problem, &config).ok()?;
    let best = run
        .samples
        .rows()
        .map(|r| (log_target(r), r))
        .filter(|(v, _)| v.is_finite())
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, r)| r.to_vec())?;
    Some((best, run.samples.covariance()))
}

fn stage1_problem<'a>(dataset: &'a Dataset, model: &'a dyn DegradationModel, bounds: &[Interval]) -> TmcmcProblem<'a> {
    let owned = bounds.to_vec();
    let support = owned.clone();
    TmcmcProblem::new(
        format!("stage1:{}:{}", dataset.id, model.name()),
        point_labels(model),
        move |rng| uniform_point(&owned, rng),
        move |x| {
            if x.iter().zip(&support).all(|(v, b)| b.contains(*v)) {
                0.0
            } else {
                f64::NEG_INFINITY
            }
        },
        |x| dataset_loglik(model, dataset, x),
    )
}

/// Stage 1 by TMCMC, also returning `ln Z_i + ln V_i`, the log marginal
/// likelihood with the uniform prior density `1/V_i` factored out.
pub fn stage1_tmcmc(
    dataset: &Dataset,
    model: &dyn DegradationModel,
    bounds: &[Interval],
    config: &SamplerConfig,
) -> Result<(SampleSet, f64)> {
    if dataset.is_empty() {
        return Err(Error::invalid(format!("dataset {} is empty", dataset.id)));
    }
    check_likelihood(model, dataset)?;
    check_bounds(bounds, model.theta_dim() + 1)?;
    let problem = stage1_problem(dataset, model, bounds);
    let run = tmcmc(&problem, config)?;
    let log_volume: f64 = bounds.iter().filter(|b| b.hi > b.lo).map(|b| b.width().ln()).sum();
    Ok((run.samples, run.log_evidence.value + log_volume))
}

fn point_labels(model: &dyn DegradationModel) -> Vec<String> {
    let mut l = model.theta_labels();
    l.push("sigma".into());
    l
}

/// Stage 2: samples of ψ from the hyper-posterior. With TMCMC the hyper-level
/// log-evidence is attached to the returned set.
pub fn stage2_infer(
    stage1: &[SampleSet],
    layout: &HyperLayout,
    bounds: &HyperPriorBounds,
    sampler: SamplerKind,
    config: &SamplerConfig,
) -> Result<SampleSet> {
    let target = HyperTarget::new(*layout, bounds.clone(), stage1)?;
    let labels = layout.labels();
    match sampler {
        SamplerKind::Slice => {
            let support = bounds.support(layout);
            let spec = TargetSpec::new("stage2", labels, |psi| target.log_target(psi)).with_support(support);
            let mut rng = rng_from_seed(derive_seed(config.seed, 0x2a17, 0));
            let init = best_start(&mut rng, |r| bounds.sample(layout, r), |x| spec.log_density(x))?;
            Ok(slice_sample(&spec, &init, config)?)
        }
        SamplerKind::Tmcmc => {
            let problem = TmcmcProblem::new(
                "stage2",
                labels,
                |rng| bounds.sample(layout, rng),
                |psi| target.log_prior(psi),
                |psi| target.log_likelihood(psi),
            );
            Ok(tmcmc(&problem, config)?.samples)
        }
    }
}

/// Sampler settings for the historical fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub stage1: SamplerConfig,
    pub stage2: SamplerConfig,
    pub stage2_sampler: SamplerKind,
    /// Stage-1 draws kept per dataset for the hyper target; `None` keeps all.
    pub stage1_keep: Option<usize>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            stage1: SamplerConfig::default(),
            stage2: SamplerConfig::default(),
            stage2_sampler: SamplerKind::Slice,
            stage1_keep: None,
        }
    }
}

impl FitOptions {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.stage1.seed = derive_seed(seed, 1, 0);
        self.stage2.seed = derive_seed(seed, 2, 0);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyResult {
    pub dataset_ids: Vec<String>,
    pub stage1: Vec<SampleSet>,
    pub hyper: SampleSet,
    pub log_evidence: Option<LogEvidence>,
    pub fingerprint: String,
}

/// Runs stage 1 on every dataset (in parallel, each with its own seed) and
/// then stage 2.
pub fn fit_historical(
    historical: &[Dataset],
    family: &ModelFamily,
    stage1_bounds: &[Interval],
    layout: &HyperLayout,
    hyper_bounds: &HyperPriorBounds,
    options: &FitOptions,
) -> Result<HierarchyResult> {
    if historical.is_empty() {
        return Err(Error::invalid("no historical datasets"));
    }
    if family.theta_dim() != layout.theta_dim {
        return Err(Error::invalid(format!(
            "family {} has {} parameters, hyper layout has {}",
            family.name(),
            family.theta_dim(),
            layout.theta_dim
        )));
    }
    let stage1: Vec<SampleSet> = historical
        .par_iter()
        .enumerate()
        .map(|(i, d)| {
            let model = d.bind(family)?;
            let cfg = SamplerConfig { seed: derive_seed(options.stage1.seed, 1, i as u64), ..options.stage1.clone() };
            stage1_infer(d, &model, stage1_bounds, &cfg)
        })
        .collect::<Result<_>>()?;
    let kept: Vec<SampleSet> = match options.stage1_keep {
        Some(n) => stage1.iter().map(|s| s.subsample(n)).collect(),
        None => stage1.clone(),
    };
    let hyper = stage2_infer(&kept, layout, hyper_bounds, options.stage2_sampler, &options.stage2)?;
    Ok(HierarchyResult {
        dataset_ids: historical.iter().map(|d| d.id.clone()).collect(),
        log_evidence: hyper.log_evidence,
        fingerprint: fingerprint_json(&(family, stage1_bounds, layout, hyper_bounds, options)),
        stage1,
        hyper,
    })
}

/// Current-unit posterior with the mixture prior built from `hyper`. With no
/// data, returns ancestral draws from the mixture prior.
pub fn update_current(
    current: &Dataset,
    hyper: &SampleSet,
    layout: &HyperLayout,
    model: &dyn DegradationModel,
    config: &SamplerConfig,
    mixture_keep: Option<usize>,
) -> Result<SampleSet> {
    check_likelihood(model, current)?;
    if model.theta_dim() != layout.theta_dim {
        return Err(Error::invalid(format!(
            "model {} has {} parameters, hyper layout has {}",
            model.name(),
            model.theta_dim(),
            layout.theta_dim
        )));
    }
    config.validate()?;
    let hyper = match mixture_keep {
        Some(n) => hyper.subsample(n),
        None => hyper.clone(),
    };
    let prior = MixturePrior::new(&hyper, layout)?;
    let labels = point_labels(model);
    let id = format!("current:{}:{}", current.id, model.name());
    let mut rng = rng_from_seed(derive_seed(config.seed, 0x3a17, 0));

    if current.is_empty() {
        let mut rng = rng_from_seed(config.seed);
        let rows: Vec<Vec<f64>> = (0..config.n_samples).map(|_| prior.sample(&mut rng)).collect();
        return Ok(SampleSet::from_rows(labels, &rows)?.with_provenance(Provenance {
            target: id,
            sampler: "ancestral".into(),
            config_hash: config.fingerprint(),
            seed: config.seed,
        }));
    }

    let d = layout.theta_dim;
    let mut support = vec![Interval::UNBOUNDED; d];
    support.push(Interval::new(0.0, layout.sigma_upper));
    let spec = TargetSpec::new(id, labels.clone(), |x| current_posterior_logtarget(x, current, &prior, model))
        .with_support(support);

    let problem = TmcmcProblem::new(
        spec.id.clone(),
        labels.clone(),
        |r| prior.sample(r),
        |x| prior.logpdf(x),
        |x| dataset_loglik(model, current, x),
    );
    if let Some((init, cov)) = pilot(&problem, |x| spec.log_density(x), config.seed) {
        return Ok(slice_sample_whitened(&spec, &init, &cov, config)?);
    }

    let draws: Vec<Vec<f64>> = (0..INIT_DRAWS).map(|_| prior.sample(&mut rng)).collect();
    let mut config = config.clone();
    if config.slice_widths.is_none() {
        let sd = SampleSet::from_rows(labels, &draws)?.std_dev();
        config.slice_widths = Some(sd.iter().map(|s| if *s > 0.0 { *s } else { 1e-3 }).collect());
    }
    let mut it = draws.into_iter();
    let init = best_start(
        &mut rng,
        |r| it.next().unwrap_or_else(|| prior.sample(r)),
        |x| spec.log_density(x),
    )?;
    Ok(slice_sample(&spec, &init, &config)?)
}

/// Independent Gaussian prior on the physical parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPrior {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl GaussianPrior {
    /// `m ~ N(2.89, 0.29)`, `ln C ~ N(-10.78, 0.17)`.
    pub fn literature_crack() -> Self {
        Self { mean: vec![2.89, -10.78], sd: vec![0.29, 0.17] }
    }

    /// The same prior expressed on the normalized parameters.
    pub fn normalized(&self, nominals: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if self.mean.len() != nominals.len() || self.sd.len() != nominals.len() {
            return Err(Error::invalid(format!(
                "prior covers {} parameters, model has {}",
                self.mean.len(),
                nominals.len()
            )));
        }
        if self.sd.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::invalid("prior standard deviations must be positive and finite"));
        }
        let mean = self.mean.iter().zip(nominals).map(|(m, n)| m / n).collect();
        let sd = self.sd.iter().zip(nominals).map(|(s, n)| s / n.abs()).collect();
        Ok((mean, sd))
    }
}

/// Single-level posterior under a Gaussian prior on the physical parameters
/// and a uniform prior on σ over `sigma_bounds`.
pub fn classical_update(
    current: &Dataset,
    prior: &GaussianPrior,
    sigma_bounds: Interval,
    model: &dyn DegradationModel,
    config: &SamplerConfig,
) -> Result<SampleSet> {
    if current.is_empty() {
        return Err(Error::invalid(format!("dataset {} is empty", current.id)));
    }
    check_likelihood(model, current)?;
    check_bounds(&[sigma_bounds], 1)?;
    let (mean, sd) = prior.normalized(&model.nominals())?;
    let d = mean.len();
    let log_prior = |x: &[f64]| -> f64 {
        x[..d].iter().zip(&mean).zip(&sd).map(|((v, m), s)| normal_logpdf(*v, *m, *s)).sum()
    };
    let mut support = vec![Interval::UNBOUNDED; d];
    support.push(sigma_bounds);
    let spec = TargetSpec::new(format!("classical:{}:{}", current.id, model.name()), point_labels(model), |x| {
        let lp = log_prior(x);
        if !lp.is_finite() {
            return f64::NEG_INFINITY;
        }
        lp + dataset_loglik(model, current, x)
    })
    .with_support(support);

    let (m2, s2) = (mean.clone(), sd.clone());
    let problem = TmcmcProblem::new(
        spec.id.clone(),
        spec.labels.clone(),
        move |r| {
            let mut x: Vec<f64> =
                m2.iter().zip(&s2).map(|(m, s)| m + s * r.sample::<f64, _>(rand_distr::StandardNormal)).collect();
            x.push(sigma_bounds.lo + r.random::<f64>() * sigma_bounds.width());
            x
        },
        |x| if sigma_bounds.contains(x[d]) { log_prior(x) } else { f64::NEG_INFINITY },
        |x| dataset_loglik(model, current, x),
    );
    if let Some((init, cov)) = pilot(&problem, |x| spec.log_density(x), config.seed) {
        return Ok(slice_sample_whitened(&spec, &init, &cov, config)?);
    }

    let mut config = config.clone();
    if config.slice_widths.is_none() {
        let mut w: Vec<f64> = sd.iter().map(|s| s.min(1.0)).collect();
        w.push(sigma_bounds.width() / 10.0);
        config.slice_widths = Some(w);
    }
    let mut rng = rng_from_seed(derive_seed(config.seed, 0x4a17, 0));
    let mut first = true;
    let init = best_start(
        &mut rng,
        |r| {
            let mut x: Vec<f64> = if std::mem::take(&mut first) {
                mean.clone()
            } else {
                mean.iter().zip(&sd).map(|(m, s)| m + s * r.sample::<f64, _>(rand_distr::StandardNormal)).collect()
            };
            x.push(sigma_bounds.lo + r.random::<f64>() * sigma_bounds.width());
            x
        },
        |x| spec.log_density(x),
    )?;
    Ok(slice_sample(&spec, &init, &config)?)
}

/// One candidate of a model-selection run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub family: ModelFamily,
    pub stage1_bounds: Vec<Interval>,
    pub layout: HyperLayout,
    pub hyper_bounds: HyperPriorBounds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionEntry {
    pub family: String,
    pub log_evidence: Option<LogEvidence>,
    /// Hyper-level term alone, before adding the stage-1 constants.
    pub hyper_log_evidence: Option<f64>,
    pub error: Option<String>,
}

/// Log-evidence of the hierarchical model for each candidate, ranked in
/// descending order. Failed candidates are kept at the end with their error.
///
/// Both stages run by TMCMC. The reported value is the hyper-level evidence
/// plus `Σ_i (ln Z_i + ln V_i)`, which restores the per-dataset factor that
/// the Monte-Carlo marginal likelihood leaves out.
pub fn model_select(
    historical: &[Dataset],
    candidates: &[Candidate],
    options: &FitOptions,
) -> Result<Vec<SelectionEntry>> {
    if candidates.len() < 2 {
        return Err(Error::invalid("model selection needs at least two candidates"));
    }
    if historical.is_empty() {
        return Err(Error::invalid("no historical datasets"));
    }
    let mut entries: Vec<SelectionEntry> = candidates
        .iter()
        .map(|c| match candidate_evidence(historical, c, options) {
            Ok((total, hyper)) => SelectionEntry {
                family: c.family.name().into(),
                log_evidence: Some(total),
                hyper_log_evidence: Some(hyper),
                error: None,
            },
            Err(e) => SelectionEntry {
                family: c.family.name().into(),
                log_evidence: None,
                hyper_log_evidence: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    // stable: ties and failures keep candidate order
    entries.sort_by(|a, b| {
        let key = |e: &SelectionEntry| e.log_evidence.map_or(f64::NEG_INFINITY, |l| l.value);
        key(b).total_cmp(&key(a))
    });
    Ok(entries)
}

fn candidate_evidence(historical: &[Dataset], c: &Candidate, options: &FitOptions) -> Result<(LogEvidence, f64)> {
    if c.family.theta_dim() != c.layout.theta_dim {
        return Err(Error::invalid("candidate layout does not match its family"));
    }
    let stage1: Vec<(SampleSet, f64)> = historical
        .par_iter()
        .enumerate()
        .map(|(i, d)| {
            let model = d.bind(&c.family)?;
            let cfg = SamplerConfig { seed: derive_seed(options.stage1.seed, 1, i as u64), ..options.stage1.clone() };
            stage1_tmcmc(d, &model, &c.stage1_bounds, &cfg)
        })
        .collect::<Result<_>>()?;
    let mut constants: Vec<f64> = stage1.iter().map(|(_, z)| *z).collect();
    let sets: Vec<SampleSet> = stage1
        .into_iter()
        .map(|(s, _)| match options.stage1_keep {
            Some(n) => s.subsample(n),
            None => s,
        })
        .collect();
    let hyper = stage2_infer(&sets, &c.layout, &c.hyper_bounds, SamplerKind::Tmcmc, &options.stage2)?;
    let ev = hyper.log_evidence.ok_or_else(|| Error::Inference("stage 2 returned no evidence".into()))?;
    let total = ev.value + crate::math::order_invariant_sum(&mut constants);
    Ok((LogEvidence { value: total, std_error: ev.std_error }, ev.value))
}
