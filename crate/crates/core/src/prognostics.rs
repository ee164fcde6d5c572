//! Posterior predictive trajectories, end-of-life and RUL distributions.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::degradation::{Crossing, DegradationModel, Eol, LikelihoodKind, ModelError};
use crate::error::{Error, Result};
use crate::math::quantile_sorted;
use crate::samplers::{derive_seed, rng_from_seed, SampleSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrognosisConfig {
    /// Failure threshold in data units.
    pub threshold: f64,
    /// Current cycle.
    pub t_c: f64,
    /// Last cycle searched for a crossing.
    pub horizon: f64,
    #[serde(default = "default_quantiles")]
    pub quantiles: Vec<f64>,
    #[serde(default)]
    pub include_observation_noise: bool,
    #[serde(default)]
    pub seed: u64,
}

fn default_quantiles() -> Vec<f64> {
    vec![0.025, 0.5, 0.975]
}

impl PrognosisConfig {
    pub fn new(threshold: f64, t_c: f64, horizon: f64) -> Self {
        Self { threshold, t_c, horizon, quantiles: default_quantiles(), include_observation_noise: false, seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.threshold.is_finite() {
            return Err(Error::invalid("failure threshold must be finite"));
        }
        if !(self.horizon > self.t_c) || !self.horizon.is_finite() || !self.t_c.is_finite() {
            return Err(Error::invalid(format!("horizon {} must exceed t_c {}", self.horizon, self.t_c)));
        }
        if self.quantiles.is_empty()
            || self.quantiles.iter().any(|q| !(*q > 0.0 && *q < 1.0))
            || self.quantiles.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::invalid(format!("quantiles {:?} must be sorted and inside (0, 1)", self.quantiles)));
        }
        Ok(())
    }
}

/// Per-cycle quantile bands; `values[i][q]` is quantile `q` at `grid[i]`.
/// A diverged trajectory contributes `±inf` (beyond the threshold side).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bands {
    pub grid: Vec<f64>,
    pub quantiles: Vec<f64>,
    #[serde(with = "nonfinite")]
    pub values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RulSummary {
    pub mean: f64,
    pub median: f64,
    pub lower: f64,
    pub upper: f64,
    /// Quantile levels of `lower` and `upper`.
    pub interval: (f64, f64),
    pub censored_fraction: f64,
    /// Set when every sample is censored.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RulDistribution {
    pub t_c: f64,
    pub horizon: f64,
    /// `None` when censored.
    pub eol: Vec<Option<f64>>,
    /// `t_EOL - t_c`; censored samples carry `horizon - t_c`.
    pub rul: Vec<f64>,
    pub censored: Vec<bool>,
    pub summary: RulSummary,
}

impl RulDistribution {
    /// Whether `value` lies in the reported credible interval.
    pub fn covers(&self, value: f64) -> bool {
        value >= self.summary.lower && value <= self.summary.upper
    }

    pub fn interval_width(&self) -> f64 {
        self.summary.upper - self.summary.lower
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrognosisResult {
    pub model: String,
    pub units: String,
    pub config: PrognosisConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bands: Option<Bands>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rul: Option<RulDistribution>,
    #[serde(default)]
    pub fingerprint: String,
}

fn split_point<'a>(model: &dyn DegradationModel, row: &'a [f64]) -> Result<(&'a [f64], f64)> {
    let d = model.theta_dim();
    match row.len() {
        n if n == d + 1 => Ok((&row[..d], row[d])),
        n if n == d => Ok((row, f64::NAN)),
        n => Err(Error::invalid(format!("sample has {n} entries, model {} needs {}", model.name(), d + 1))),
    }
}

fn crossed_value(direction: Crossing) -> f64 {
    match direction {
        Crossing::Upward => f64::INFINITY,
        Crossing::Downward => f64::NEG_INFINITY,
    }
}

/// Evaluates every posterior sample on `grid` and summarizes by quantiles.
pub fn predict_trajectory(
    samples: &SampleSet,
    model: &dyn DegradationModel,
    grid: &[f64],
    cfg: &PrognosisConfig,
) -> Result<Bands> {
    if samples.is_empty() {
        return Err(Error::invalid("no posterior samples"));
    }
    if grid.is_empty() || grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid("prediction grid must be nonempty and strictly increasing"));
    }
    cfg.validate()?;
    let direction = model.crossing();
    let noise = cfg.include_observation_noise;
    let likelihood = model.likelihood();

    let paths: Vec<Vec<f64>> = (0..samples.len())
        .into_par_iter()
        .map(|l| -> Result<Vec<f64>> {
            let (theta, sigma) = split_point(model, samples.row(l))?;
            if noise && !(sigma > 0.0) {
                return Err(Error::invalid("observation noise requested but samples carry no positive sigma"));
            }
            let mut rng = rng_from_seed(derive_seed(cfg.seed, l as u64, 0x7a17));
            let mut out = Vec::with_capacity(grid.len());
            let mut diverged = false;
            for &k in grid {
                if diverged {
                    out.push(crossed_value(direction));
                    continue;
                }
                let v = match model.predict(theta, k) {
                    Ok(v) => v,
                    Err(ModelError::Diverged { .. }) => {
                        diverged = true;
                        out.push(crossed_value(direction));
                        continue;
                    }
                    Err(e) => return Err(e.into()),
                };
                out.push(if noise { perturb(v, sigma, likelihood, &mut rng) } else { v });
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let values = (0..grid.len())
        .map(|i| {
            let mut col: Vec<f64> = paths.iter().map(|p| p[i]).collect();
            col.sort_by(f64::total_cmp);
            cfg.quantiles.iter().map(|&q| quantile_sorted(&col, q)).collect()
        })
        .collect();
    Ok(Bands { grid: grid.to_vec(), quantiles: cfg.quantiles.clone(), values })
}

fn perturb<R: Rng + ?Sized>(pred: f64, sigma: f64, kind: LikelihoodKind, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    match kind {
        LikelihoodKind::Gaussian => pred + sigma * z,
        LikelihoodKind::LogNormal => {
            let r = sigma / pred;
            let zeta2 = (r * r).ln_1p();
            (pred.ln() - 0.5 * zeta2 + zeta2.sqrt() * z).exp()
        }
    }
}

/// End of life of one sample: crack families use the closed form, battery
/// families the first crossing in `(t_c, horizon]`.
pub fn end_of_life(point: &[f64], model: &dyn DegradationModel, cfg: &PrognosisConfig) -> Result<Eol> {
    let (theta, _) = split_point(model, point)?;
    Ok(model.end_of_life(theta, cfg.threshold, cfg.t_c, cfg.horizon)?)
}

/// RUL samples `t_EOL − t_c` with censoring flags and a summary.
pub fn rul_distribution(
    samples: &SampleSet,
    model: &dyn DegradationModel,
    cfg: &PrognosisConfig,
) -> Result<RulDistribution> {
    if samples.is_empty() {
        return Err(Error::invalid("no posterior samples"));
    }
    cfg.validate()?;
    let eol: Vec<Option<f64>> = (0..samples.len())
        .into_par_iter()
        .map(|l| {
            Ok(match end_of_life(samples.row(l), model, cfg)? {
                Eol::At(t) => Some(t),
                Eol::Censored => None,
            })
        })
        .collect::<Result<_>>()?;
    let censored: Vec<bool> = eol.iter().map(Option::is_none).collect();
    let rul: Vec<f64> = eol.iter().map(|e| e.unwrap_or(cfg.horizon) - cfg.t_c).collect();

    let mut sorted = rul.clone();
    sorted.sort_by(f64::total_cmp);
    let n = rul.len() as f64;
    let censored_fraction = censored.iter().filter(|c| **c).count() as f64 / n;
    let (q_lo, q_hi) = (cfg.quantiles[0], *cfg.quantiles.last().unwrap());
    let summary = RulSummary {
        mean: sorted.iter().sum::<f64>() / n,
        median: quantile_sorted(&sorted, 0.5),
        lower: quantile_sorted(&sorted, q_lo),
        upper: quantile_sorted(&sorted, q_hi),
        interval: (q_lo, q_hi),
        censored_fraction,
        flag: (censored_fraction == 1.0).then(|| "no informative RUL within horizon".to_string()),
    };
    Ok(RulDistribution { t_c: cfg.t_c, horizon: cfg.horizon, eol, rul, censored, summary })
}

/// Serializes nested float vectors with `"inf"`, `"-inf"` and `"nan"` strings
/// for non-finite entries, which plain JSON cannot carry.
mod nonfinite {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    fn to_repr(v: f64) -> Repr {
        if v.is_finite() {
            Repr::Num(v)
        } else if v.is_nan() {
            Repr::Text("nan".into())
        } else if v > 0.0 {
            Repr::Text("inf".into())
        } else {
            Repr::Text("-inf".into())
        }
    }

    pub fn serialize<S: Serializer>(values: &[Vec<f64>], s: S) -> Result<S::Ok, S::Error> {
        let repr: Vec<Vec<Repr>> = values.iter().map(|r| r.iter().map(|v| to_repr(*v)).collect()).collect();
        repr.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<f64>>, D::Error> {
        let repr: Vec<Vec<Repr>> = Vec::deserialize(d)?;
        repr.into_iter()
            .map(|row| {
                row.into_iter()
                    .map(|r| match r {
                        Repr::Num(v) => Ok(v),
                        Repr::Text(t) => match t.as_str() {
                            "inf" => Ok(f64::INFINITY),
                            "-inf" => Ok(f64::NEG_INFINITY),
                            "nan" => Ok(f64::NAN),
                            other => Err(D::Error::custom(format!("invalid number {other:?}"))),
                        },
                    })
                    .collect()
            })
            .collect()
    }
}
