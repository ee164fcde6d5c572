//! Degradation series for one unit plus the metadata needed to bind a model.

use serde::{Deserialize, Serialize};

use crate::degradation::{BoundModel, CrackGeometry, DataKind, LoadingSpec, ModelFamily};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub kind: DataKind,
    /// Unit of the measured value, e.g. "mm" or "Ahr". Echoed, never converted.
    pub units: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<CrackGeometry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loading: Option<LoadingSpec>,
    /// Failure threshold in `units`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl DatasetMeta {
    pub fn crack(geometry: CrackGeometry, loading: LoadingSpec) -> Self {
        Self {
            kind: DataKind::Crack,
            units: "mm".into(),
            family: Some("paris".into()),
            threshold: Some(geometry.a_f),
            geometry: Some(geometry),
            loading: Some(loading),
            note: None,
        }
    }

    pub fn battery(threshold: f64) -> Self {
        Self {
            kind: DataKind::Battery,
            units: "Ahr".into(),
            family: None,
            geometry: None,
            loading: None,
            threshold: Some(threshold),
            note: None,
        }
    }
}

/// A unit's series of `(cycle, value)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub id: String,
    cycles: Vec<f64>,
    values: Vec<f64>,
    pub meta: DatasetMeta,
}

impl Dataset {
    /// Checks that cycles are nonnegative integers, strictly increasing, and
    /// that values are finite and positive.
    pub fn new(id: impl Into<String>, cycles: Vec<f64>, values: Vec<f64>, meta: DatasetMeta) -> Result<Self> {
        let id = id.into();
        if cycles.len() != values.len() {
            return Err(Error::invalid(format!("{id}: {} cycles but {} values", cycles.len(), values.len())));
        }
        for (i, (&k, &v)) in cycles.iter().zip(&values).enumerate() {
            check_point(k, v, i.checked_sub(1).map(|p| cycles[p])).map_err(|m| Error::invalid(format!("{id}: point {i}: {m}")))?;
        }
        Ok(Self { id, cycles, values, meta })
    }

    pub fn cycles(&self) -> &[f64] {
        &self.cycles
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.cycles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cycles.is_empty()
    }

    pub fn last_cycle(&self) -> Option<f64> {
        self.cycles.last().copied()
    }

    /// Points observed at or before `t_c`.
    pub fn truncated(&self, t_c: f64) -> Dataset {
        let n = self.cycles.partition_point(|&k| k <= t_c);
        Dataset {
            id: self.id.clone(),
            cycles: self.cycles[..n].to_vec(),
            values: self.values[..n].to_vec(),
            meta: self.meta.clone(),
        }
    }

    /// First `n` points.
    pub fn head(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        Dataset {
            id: self.id.clone(),
            cycles: self.cycles[..n].to_vec(),
            values: self.values[..n].to_vec(),
            meta: self.meta.clone(),
        }
    }

    /// Binds `family` to this unit, checking that the physics match.
    pub fn bind(&self, family: &ModelFamily) -> Result<BoundModel> {
        if family.kind() != self.meta.kind {
            return Err(Error::invalid(format!(
                "dataset {} holds {:?} data but family {} models {:?}",
                self.id,
                self.meta.kind,
                family.name(),
                family.kind()
            )));
        }
        let crack = match (self.meta.geometry, self.meta.loading) {
            (Some(g), Some(l)) => Some((g, l)),
            _ => None,
        };
        Ok(family.bind(crack)?)
    }
}

pub(crate) fn check_point(cycle: f64, value: f64, prev: Option<f64>) -> std::result::Result<(), String> {
    if !(cycle >= 0.0) || cycle.fract() != 0.0 || !cycle.is_finite() {
        return Err(format!("cycle {cycle} is not a nonnegative integer"));
    }
    if let Some(p) = prev {
        if cycle <= p {
            return Err(format!("cycle {cycle} does not increase (previous {p})"));
        }
    }
    if !(value > 0.0) || !value.is_finite() {
        return Err(format!("value {value} must be finite and positive"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_repeated_cycle_and_bad_values() {
        let m = DatasetMeta::battery(1.4);
        assert!(Dataset::new("b", vec![1.0, 1.0], vec![1.9, 1.8], m.clone()).is_err());
        assert!(Dataset::new("b", vec![1.0, 2.0], vec![1.9, f64::NAN], m.clone()).is_err());
        assert!(Dataset::new("b", vec![1.5], vec![1.9], m.clone()).is_err());
        let d = Dataset::new("b", vec![1.0, 2.0, 5.0], vec![1.9, 1.8, 1.7], m).unwrap();
        assert_eq!(d.truncated(2.0).len(), 2);
        assert_eq!(d.truncated(0.0).len(), 0);
    }

    #[test]
    fn bind_checks_kind() {
        let d = Dataset::new("b", vec![1.0], vec![1.9], DatasetMeta::battery(1.4)).unwrap();
        assert!(d.bind(&ModelFamily::from_name("paris").unwrap()).is_err());
        assert!(d.bind(&ModelFamily::from_name("batt-double").unwrap()).is_ok());
    }
}
