//! Hierarchical Bayesian prognostics.
//!
//! Historical degradation series from a fleet of similar units are combined
//! into a population prior over the parameters of a physics or empirical
//! model. A new unit's parameters are then updated from its own early data and
//! propagated to a remaining-useful-life distribution.
//!
//! The pipeline in brief:
//!
//! 1. [`hierarchy::stage1_infer`] samples each historical unit's posterior
//!    under a uniform prior.
//! 2. [`hierarchy::stage2_infer`] samples the population hyper-parameters
//!    from those draws.
//! 3. [`hierarchy::update_current`] conditions the current unit on its data
//!    with the resulting mixture prior.
//! 4. [`prognostics::rul_distribution`] turns parameter draws into RUL draws.

// `!(x > 0.0)` style guards are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod degradation;
pub mod error;
pub mod hierarchy;
pub mod io;
pub mod math;
pub mod prognostics;
pub mod samplers;
pub mod targets;

pub use data::{Dataset, DatasetMeta};
pub use degradation::{BoundModel, DataKind, DegradationModel, Eol, LikelihoodKind, ModelError, ModelFamily};
pub use error::{Error, ErrorCategory, Result};
pub use hierarchy::{FitOptions, HierarchyResult, SamplerKind};
pub use prognostics::{PrognosisConfig, PrognosisResult, RulDistribution};
pub use samplers::{Interval, LogEvidence, SampleSet, SamplerConfig, SamplerError, TmcmcConfig};
pub use targets::{HyperLayout, HyperParameters, HyperPriorBounds, PriorCase};
