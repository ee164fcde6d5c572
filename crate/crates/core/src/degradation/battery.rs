//! Empirical capacity-fade models for lithium-ion cells.

use serde::{Deserialize, Serialize};

use super::{Crossing, DataKind, DegradationModel, LikelihoodKind, ModelError};

pub const SINGLE_NOMINALS: [f64; 3] = [2.0, -1.0, -100.0];
pub const DOUBLE_NOMINALS: [f64; 4] = [1.92, -0.02, -0.003, -0.05];

fn check_dim(theta: &[f64], expected: usize) -> Result<(), ModelError> {
    if theta.len() == expected {
        Ok(())
    } else {
        Err(ModelError::Dimension { expected, got: theta.len() })
    }
}

fn finite(v: f64) -> Result<f64, ModelError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ModelError::NonFinite)
    }
}

/// Physical parameters of `Q = C₀ + a·exp(b/k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatterySingleParams {
    pub c0: f64,
    pub a: f64,
    pub b: f64,
}

impl BatterySingleParams {
    pub fn from_theta(theta: &[f64], nominals: &[f64; 3]) -> Result<Self, ModelError> {
        check_dim(theta, 3)?;
        let p = Self { c0: theta[0] * nominals[0], a: theta[1] * nominals[1], b: theta[2] * nominals[2] };
        if !(p.c0 > 0.0) {
            return Err(ModelError::InvalidParameter(format!("initial capacity {} must be positive", p.c0)));
        }
        Ok(p)
    }

    /// Capacity (Ahr) at discharge cycle `k ≥ 1`.
    pub fn capacity(&self, k: f64) -> Result<f64, ModelError> {
        if !(k >= 1.0) {
            return Err(ModelError::BelowDomain { cycle: k });
        }
        finite(self.c0 + self.a * (self.b / k).exp())
    }
}

/// Physical parameters of `Q = ã·exp(b̃k) + c̃·exp(d̃k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryDoubleParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl BatteryDoubleParams {
    pub fn from_theta(theta: &[f64], nominals: &[f64; 4]) -> Result<Self, ModelError> {
        check_dim(theta, 4)?;
        let p = Self {
            a: theta[0] * nominals[0],
            b: theta[1] * nominals[1],
            c: theta[2] * nominals[2],
            d: theta[3] * nominals[3],
        };
        if !(p.a + p.c > 0.0) {
            return Err(ModelError::InvalidParameter(format!("initial capacity {} must be positive", p.a + p.c)));
        }
        Ok(p)
    }

    pub fn capacity(&self, k: f64) -> Result<f64, ModelError> {
        if !(k >= 0.0) {
            return Err(ModelError::BelowDomain { cycle: k });
        }
        finite(self.a * (self.b * k).exp() + self.c * (self.d * k).exp())
    }
}

pub fn battery_capacity_single(params: &BatterySingleParams, k: f64) -> Result<f64, ModelError> {
    params.capacity(k)
}

pub fn battery_capacity_double(params: &BatteryDoubleParams, k: f64) -> Result<f64, ModelError> {
    params.capacity(k)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleExpModel {
    pub nominals: [f64; 3],
}

impl Default for SingleExpModel {
    fn default() -> Self {
        Self { nominals: SINGLE_NOMINALS }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoubleExpModel {
    pub nominals: [f64; 4],
}

impl Default for DoubleExpModel {
    fn default() -> Self {
        Self { nominals: DOUBLE_NOMINALS }
    }
}

/// Flat capacity `Q = θ₁·C₀₀`; a deliberately poor baseline for model comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantModel {
    pub nominal: f64,
}

impl Default for ConstantModel {
    fn default() -> Self {
        Self { nominal: 2.0 }
    }
}

macro_rules! battery_common {
    () => {
        fn kind(&self) -> DataKind {
            DataKind::Battery
        }

        fn likelihood(&self) -> LikelihoodKind {
            LikelihoodKind::Gaussian
        }

        fn crossing(&self) -> Crossing {
            Crossing::Downward
        }
    };
}

impl DegradationModel for SingleExpModel {
    battery_common!();

    fn name(&self) -> &str {
        "batt-single"
    }

    fn theta_labels(&self) -> Vec<String> {
        (1..=3).map(|i| format!("theta{i}")).collect()
    }

    fn nominals(&self) -> Vec<f64> {
        self.nominals.to_vec()
    }

    fn predict(&self, theta: &[f64], cycle: f64) -> Result<f64, ModelError> {
        BatterySingleParams::from_theta(theta, &self.nominals)?.capacity(cycle)
    }
}

impl DegradationModel for DoubleExpModel {
    battery_common!();

    fn name(&self) -> &str {
        "batt-double"
    }

    fn theta_labels(&self) -> Vec<String> {
        (1..=4).map(|i| format!("theta{i}")).collect()
    }

    fn nominals(&self) -> Vec<f64> {
        self.nominals.to_vec()
    }

    fn predict(&self, theta: &[f64], cycle: f64) -> Result<f64, ModelError> {
        BatteryDoubleParams::from_theta(theta, &self.nominals)?.capacity(cycle)
    }
}

impl DegradationModel for ConstantModel {
    battery_common!();

    fn name(&self) -> &str {
        "batt-const"
    }

    fn theta_labels(&self) -> Vec<String> {
        vec!["theta1".into()]
    }

    fn nominals(&self) -> Vec<f64> {
        vec![self.nominal]
    }

    fn predict(&self, theta: &[f64], cycle: f64) -> Result<f64, ModelError> {
        check_dim(theta, 1)?;
        if !(cycle >= 0.0) {
            return Err(ModelError::BelowDomain { cycle });
        }
        finite(theta[0] * self.nominal)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_nominal_value() {
        let p = BatterySingleParams::from_theta(&[1.0, 1.0, 1.0], &SINGLE_NOMINALS).unwrap();
        let q = battery_capacity_single(&p, 100.0).unwrap();
        assert!((q - (2.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert!((q - 1.6321).abs() < 1e-4);
        // k -> inf approaches C0 + a
        assert!((p.capacity(1e12).unwrap() - 1.0).abs() < 1e-9);
        let flat = BatterySingleParams::from_theta(&[1.0, 0.0, 1.0], &SINGLE_NOMINALS).unwrap();
        for k in [1.0, 10.0, 500.0] {
            assert_eq!(flat.capacity(k).unwrap(), 2.0);
        }
    }

    #[test]
    fn single_rejects_cycle_zero() {
        let p = BatterySingleParams::from_theta(&[1.0, 1.0, 1.0], &SINGLE_NOMINALS).unwrap();
        assert!(matches!(p.capacity(0.0), Err(ModelError::BelowDomain { .. })));
        assert!(matches!(p.capacity(0.5), Err(ModelError::BelowDomain { .. })));
        assert!(BatterySingleParams::from_theta(&[-0.1, 1.0, 1.0], &SINGLE_NOMINALS).is_err());
    }

    #[test]
    fn double_nominal_values() {
        let p = BatteryDoubleParams::from_theta(&[1.0; 4], &DOUBLE_NOMINALS).unwrap();
        assert!((p.capacity(0.0).unwrap() - 1.917).abs() < 1e-15);
        // k = 50: 1.92 e^-1 - 0.003 e^-2.5, digits from an independent 30-digit evaluation
        let q = battery_capacity_double(&p, 50.0).unwrap();
        assert!((q - 0.706_082_272_053_297_6).abs() < 1e-14, "{q}");
        let no_c = BatteryDoubleParams::from_theta(&[1.0, 1.0, 0.0, 1.0], &DOUBLE_NOMINALS).unwrap();
        assert!((no_c.capacity(30.0).unwrap() - 1.92 * (-0.6f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn model_trait_dimension_checks() {
        let m = DoubleExpModel::default();
        assert!(matches!(m.predict(&[1.0; 3], 1.0), Err(ModelError::Dimension { expected: 4, got: 3 })));
        assert_eq!(m.theta_dim(), 4);
        assert_eq!(SingleExpModel::default().theta_dim(), 3);
    }
}
