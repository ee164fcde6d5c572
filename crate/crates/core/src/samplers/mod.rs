//! Posterior samplers over unnormalized log-densities.
//!
//! [`slice_sample`] runs coordinate-wise slice sampling with stepping out and
//! shrinkage. [`tmcmc`] runs transitional MCMC and also estimates the log
//! evidence of the tempered problem.

mod config;
mod sample_set;
mod slice;
mod tmcmc;

pub use config::{fingerprint_json, SamplerConfig, TmcmcConfig};
pub use sample_set::{LogEvidence, Provenance, SampleSet};
pub use slice::{slice_sample, slice_sample_whitened};
pub use tmcmc::{tmcmc, TmcmcProblem, TmcmcRun};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub type SamplerRng = ChaCha8Rng;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplerError {
    #[error("initial point has non-finite log density {log_density}")]
    InitOutsideSupport { log_density: f64 },
    #[error("step-out exhausted after {steps} steps in dimension {dim} (width {width}, x = {x}); target looks improper")]
    StepOutExhausted { dim: usize, steps: usize, width: f64, x: f64 },
    #[error("shrinkage did not find a point in dimension {dim} after {steps} proposals (x = {x})")]
    ShrinkageExhausted { dim: usize, steps: usize, x: f64 },
    #[error("tempering collapse at stage {stage} (beta = {beta}, effective sample size {ess:.3})")]
    TemperingCollapse { stage: usize, beta: f64, ess: f64 },
    #[error("internal error: tempering exponent did not increase at stage {stage} (beta = {beta})")]
    NonIncreasingBeta { stage: usize, beta: f64 },
    #[error("no finite log-target point found after {attempts} attempts")]
    NoValidPoint { attempts: usize },
    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("sample set contains non-finite values")]
    NonFiniteDraw,
    #[error("empty sample set")]
    Empty,
}

/// Support interval for one coordinate; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const UNBOUNDED: Interval = Interval { lo: f64::NEG_INFINITY, hi: f64::INFINITY };

    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn is_finite(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

type LogFn<'a> = Box<dyn Fn(&[f64]) -> f64 + Send + Sync + 'a>;

/// An unnormalized log-density with per-coordinate support.
pub struct TargetSpec<'a> {
    pub id: String,
    pub labels: Vec<String>,
    pub support: Vec<Interval>,
    log_target: LogFn<'a>,
}

impl<'a> TargetSpec<'a> {
    pub fn new(id: impl Into<String>, labels: Vec<String>, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'a) -> Self {
        let support = vec![Interval::UNBOUNDED; labels.len()];
        Self { id: id.into(), labels, support, log_target: Box::new(f) }
    }

    pub fn with_support(mut self, support: Vec<Interval>) -> Self {
        assert_eq!(support.len(), self.labels.len(), "support length must equal dimension");
        self.support = support;
        self
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    /// Log-density, `-inf` outside the support; never NaN.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        if !x.iter().zip(&self.support).all(|(v, s)| s.contains(*v)) {
            return f64::NEG_INFINITY;
        }
        let v = (self.log_target)(x);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    }
}

/// Mixes a base seed with stream coordinates (splitmix64 finalizer).
pub fn derive_seed(base: u64, a: u64, b: u64) -> u64 {
    let mut z = base
        .wrapping_add(a.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(b.wrapping_mul(0xD1B5_4A32_D192_ED03))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng_from_seed(seed: u64) -> SamplerRng {
    ChaCha8Rng::seed_from_u64(seed)
}
