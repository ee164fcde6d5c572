use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::SamplerError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TmcmcConfig {
    /// Particles per stage; `None` means `n_samples`.
    pub stage_size: Option<usize>,
    /// Target coefficient of variation of the incremental weights.
    pub target_cov: f64,
    /// Metropolis steps per particle after each resampling.
    pub mcmc_steps: usize,
    /// Proposal covariance is `scale² · Σ_stage`.
    pub proposal_scale: f64,
    pub max_stages: usize,
}

impl Default for TmcmcConfig {
    fn default() -> Self {
        Self {
            stage_size: None,
            target_cov: 1.0,
            mcmc_steps: 3,
            proposal_scale: 0.2,
            max_stages: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub n_samples: usize,
    /// Fraction of the chain discarded as warm-up.
    pub burn_in: f64,
    pub thin: usize,
    pub seed: u64,
    /// Initial slice widths per dimension; defaults to range/10 for bounded
    /// dimensions and 1.0 otherwise.
    pub slice_widths: Option<Vec<f64>>,
    pub max_step_out: usize,
    pub max_shrink: usize,
    pub tmcmc: TmcmcConfig,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_samples: 5000,
            burn_in: 0.2,
            thin: 1,
            seed: 0,
            slice_widths: None,
            max_step_out: 200,
            max_shrink: 500,
            tmcmc: TmcmcConfig::default(),
        }
    }
}

impl SamplerConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_samples(mut self, n: usize) -> Self {
        self.n_samples = n;
        self
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.n_samples == 0 {
            return Err(SamplerError::InvalidConfig("n_samples must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.burn_in) {
            return Err(SamplerError::InvalidConfig(format!("burn_in {} outside [0, 1)", self.burn_in)));
        }
        if self.thin == 0 {
            return Err(SamplerError::InvalidConfig("thin must be at least 1".into()));
        }
        if let Some(w) = &self.slice_widths {
            if w.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
                return Err(SamplerError::InvalidConfig("slice widths must be finite and nonnegative".into()));
            }
        }
        if !(self.tmcmc.target_cov > 0.0) || self.tmcmc.stage_size == Some(0) {
            return Err(SamplerError::InvalidConfig("invalid TMCMC settings".into()));
        }
        Ok(())
    }

    /// Warm-up sweeps so that `burn_in` is the discarded fraction of the chain.
    pub fn burn_in_sweeps(&self) -> usize {
        let kept = (self.n_samples * self.thin) as f64;
        (kept * self.burn_in / (1.0 - self.burn_in)).round() as usize
    }

    /// Short, stable fingerprint of the configuration.
    pub fn fingerprint(&self) -> String {
        fingerprint_json(self)
    }
}

/// First 16 hex digits of SHA-256 over the JSON encoding of `value`.
pub fn fingerprint_json<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config serializes");
    let digest = Sha256::digest(&bytes);
    hex::encode(&digest[..8])
}
