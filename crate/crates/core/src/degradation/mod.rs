//! Closed-form degradation model families `g(θ, t)`.
//!
//! Every family works on dimensionless parameters `θ_j = p_j / p_j,nominal`
//! so that samplers see comparable scales across components.

mod battery;
mod crack;

pub use battery::{
    battery_capacity_double, battery_capacity_single, BatteryDoubleParams, BatterySingleParams, ConstantModel,
    DoubleExpModel, SingleExpModel, DOUBLE_NOMINALS, SINGLE_NOMINALS,
};
pub use crack::{
    crack_length, cycles_to_failure, cycles_to_length, equivalent_stress, CrackGeometry, CrackNominals, CrackParams,
    LoadingSpec, ParisModel, M_TOL,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("crack length diverged before cycle {cycle}")]
    Diverged { cycle: f64 },
    #[error("cycle index {cycle} below model domain")]
    BelowDomain { cycle: f64 },
    #[error("no finite failure time: {0}")]
    NoFiniteFailure(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("parameter dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("model evaluation produced a non-finite value")]
    NonFinite,
}

/// What a dataset physically measures; decides which families may fit it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataKind {
    Crack,
    Battery,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LikelihoodKind {
    /// Multiplicative error, mean-matched lognormal.
    LogNormal,
    /// Additive Gaussian error.
    Gaussian,
}

/// Direction in which the degradation state crosses the failure threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Crossing {
    Upward,
    Downward,
}

impl Crossing {
    pub fn crossed(self, value: f64, threshold: f64) -> bool {
        match self {
            Crossing::Upward => value >= threshold,
            Crossing::Downward => value <= threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Eol {
    At(f64),
    Censored,
}

/// A degradation model bound to whatever per-unit metadata it needs.
pub trait DegradationModel: Send + Sync {
    fn name(&self) -> &str;
    fn kind(&self) -> DataKind;
    fn theta_labels(&self) -> Vec<String>;
    /// Nominal physical values; `θ_j = p_j / nominals[j]`.
    fn nominals(&self) -> Vec<f64>;
    fn likelihood(&self) -> LikelihoodKind;
    fn crossing(&self) -> Crossing;
    fn predict(&self, theta: &[f64], cycle: f64) -> Result<f64, ModelError>;

    fn theta_dim(&self) -> usize {
        self.theta_labels().len()
    }

    /// First threshold crossing in `(t_c, horizon]`.
    fn end_of_life(&self, theta: &[f64], threshold: f64, t_c: f64, horizon: f64) -> Result<Eol, ModelError> {
        first_crossing(|k| self.predict(theta, k), self.crossing(), threshold, t_c, horizon)
    }
}

/// Integer-cycle first-crossing search: coarse scan, then bisection inside the
/// bracketing step. A divergent evaluation counts as crossed.
pub fn first_crossing<F>(eval: F, direction: Crossing, threshold: f64, t_c: f64, horizon: f64) -> Result<Eol, ModelError>
where
    F: Fn(f64) -> Result<f64, ModelError>,
{
    let crossed = |k: u64| -> Result<bool, ModelError> {
        match eval(k as f64) {
            Ok(v) => Ok(direction.crossed(v, threshold)),
            Err(ModelError::Diverged { .. }) => Ok(true),
            Err(e) => Err(e),
        }
    };
    let start = if t_c < 0.0 { 0 } else { t_c.floor() as u64 + 1 };
    if !(horizon >= start as f64) {
        return Ok(Eol::Censored);
    }
    let end = horizon.floor() as u64;
    let step = ((end - start) / 1024).max(1);
    let mut prev: Option<u64> = None;
    let mut k = start;
    loop {
        if crossed(k)? {
            let Some(mut lo) = prev else {
                return Ok(Eol::At(k as f64));
            };
            // invariant: lo not crossed, hi crossed
            let mut hi = k;
            while hi - lo > 1 {
                let mid = lo + (hi - lo) / 2;
                if crossed(mid)? {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Ok(Eol::At(hi as f64));
        }
        if k == end {
            return Ok(Eol::Censored);
        }
        prev = Some(k);
        k = (k + step).min(end);
    }
}

/// Serializable model family choice plus its nominal values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum ModelFamily {
    Paris {
        #[serde(default)]
        nominal: CrackNominals,
    },
    BattSingle {
        #[serde(default = "single_nominals")]
        nominals: [f64; 3],
    },
    BattDouble {
        #[serde(default = "double_nominals")]
        nominals: [f64; 4],
    },
    BattConst {
        #[serde(default = "const_nominal")]
        nominal: f64,
    },
}

fn single_nominals() -> [f64; 3] {
    SINGLE_NOMINALS
}
fn double_nominals() -> [f64; 4] {
    DOUBLE_NOMINALS
}
fn const_nominal() -> f64 {
    2.0
}

impl ModelFamily {
    /// Parses the command-line spelling with default nominal values.
    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "paris" => ModelFamily::Paris { nominal: CrackNominals::default() },
            "batt-single" => ModelFamily::BattSingle { nominals: SINGLE_NOMINALS },
            "batt-double" => ModelFamily::BattDouble { nominals: DOUBLE_NOMINALS },
            "batt-const" => ModelFamily::BattConst { nominal: 2.0 },
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelFamily::Paris { .. } => "paris",
            ModelFamily::BattSingle { .. } => "batt-single",
            ModelFamily::BattDouble { .. } => "batt-double",
            ModelFamily::BattConst { .. } => "batt-const",
        }
    }

    pub fn kind(&self) -> DataKind {
        match self {
            ModelFamily::Paris { .. } => DataKind::Crack,
            _ => DataKind::Battery,
        }
    }

    pub fn theta_dim(&self) -> usize {
        match self {
            ModelFamily::Paris { .. } => 2,
            ModelFamily::BattSingle { .. } => 3,
            ModelFamily::BattDouble { .. } => 4,
            ModelFamily::BattConst { .. } => 1,
        }
    }

    /// Binds the family to a unit. Crack models need geometry and loading.
    pub fn bind(&self, crack: Option<(CrackGeometry, LoadingSpec)>) -> Result<BoundModel, ModelError> {
        Ok(match self {
            ModelFamily::Paris { nominal } => {
                let (geometry, loading) = crack.ok_or_else(|| {
                    ModelError::InvalidParameter("crack model needs geometry and loading metadata".into())
                })?;
                BoundModel::Paris(ParisModel::new(*nominal, geometry, loading)?)
            }
            ModelFamily::BattSingle { nominals } => BoundModel::Single(SingleExpModel { nominals: *nominals }),
            ModelFamily::BattDouble { nominals } => BoundModel::Double(DoubleExpModel { nominals: *nominals }),
            ModelFamily::BattConst { nominal } => BoundModel::Constant(ConstantModel { nominal: *nominal }),
        })
    }
}

/// A family bound to one unit, dispatching statically.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundModel {
    Paris(ParisModel),
    Single(SingleExpModel),
    Double(DoubleExpModel),
    Constant(ConstantModel),
}

macro_rules! dispatch {
    ($self:ident, $m:ident => $e:expr) => {
        match $self {
            BoundModel::Paris($m) => $e,
            BoundModel::Single($m) => $e,
            BoundModel::Double($m) => $e,
            BoundModel::Constant($m) => $e,
        }
    };
}

impl DegradationModel for BoundModel {
    fn name(&self) -> &str {
        dispatch!(self, m => m.name())
    }
    fn kind(&self) -> DataKind {
        dispatch!(self, m => m.kind())
    }
    fn theta_labels(&self) -> Vec<String> {
        dispatch!(self, m => m.theta_labels())
    }
    fn nominals(&self) -> Vec<f64> {
        dispatch!(self, m => m.nominals())
    }
    fn likelihood(&self) -> LikelihoodKind {
        dispatch!(self, m => m.likelihood())
    }
    fn crossing(&self) -> Crossing {
        dispatch!(self, m => m.crossing())
    }
    fn predict(&self, theta: &[f64], cycle: f64) -> Result<f64, ModelError> {
        dispatch!(self, m => m.predict(theta, cycle))
    }
    fn end_of_life(&self, theta: &[f64], threshold: f64, t_c: f64, horizon: f64) -> Result<Eol, ModelError> {
        dispatch!(self, m => m.end_of_life(theta, threshold, t_c, horizon))
    }
}
