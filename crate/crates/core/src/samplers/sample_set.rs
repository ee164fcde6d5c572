use serde::{Deserialize, Serialize};

use super::SamplerError;
use crate::math::quantile_sorted;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub target: String,
    pub sampler: String,
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogEvidence {
    pub value: f64,
    pub std_error: f64,
}

/// Draws of a parameter vector, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    labels: Vec<String>,
    data: Vec<f64>,
    pub provenance: Provenance,
    pub log_evidence: Option<LogEvidence>,
}

impl SampleSet {
    pub fn from_flat(labels: Vec<String>, data: Vec<f64>) -> Result<Self, SamplerError> {
        let dim = labels.len();
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(SamplerError::Dimension { expected: dim, got: data.len() });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(SamplerError::NonFiniteDraw);
        }
        Ok(Self { labels, data, provenance: Provenance::default(), log_evidence: None })
    }

    pub fn from_rows(labels: Vec<String>, rows: &[Vec<f64>]) -> Result<Self, SamplerError> {
        let dim = labels.len();
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            if r.len() != dim {
                return Err(SamplerError::Dimension { expected: dim, got: r.len() });
            }
            data.extend_from_slice(r);
        }
        Self::from_flat(labels, data)
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.data[i * d..(i + 1) * d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim())
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn mean(&self) -> Vec<f64> {
        let n = self.len() as f64;
        let mut m = vec![0.0; self.dim()];
        for r in self.rows() {
            for (acc, v) in m.iter_mut().zip(r) {
                *acc += v;
            }
        }
        m.iter_mut().for_each(|v| *v /= n);
        m
    }

    /// Unbiased sample covariance, row-major `dim × dim`.
    pub fn covariance(&self) -> Vec<f64> {
        let d = self.dim();
        let mean = self.mean();
        let mut c = vec![0.0; d * d];
        for r in self.rows() {
            for i in 0..d {
                let di = r[i] - mean[i];
                for j in i..d {
                    c[i * d + j] += di * (r[j] - mean[j]);
                }
            }
        }
        let denom = (self.len().max(2) - 1) as f64;
        for i in 0..d {
            for j in i..d {
                c[i * d + j] /= denom;
                c[j * d + i] = c[i * d + j];
            }
        }
        c
    }

    pub fn std_dev(&self) -> Vec<f64> {
        let d = self.dim();
        let c = self.covariance();
        (0..d).map(|i| c[i * d + i].sqrt()).collect()
    }

    pub fn quantile(&self, j: usize, p: f64) -> f64 {
        let mut col = self.column(j);
        col.sort_by(f64::total_cmp);
        quantile_sorted(&col, p)
    }

    /// Keeps `n` evenly spaced rows (all rows when `n >= len`).
    pub fn subsample(&self, n: usize) -> SampleSet {
        let len = self.len();
        if n >= len || n == 0 {
            return self.clone();
        }
        let mut data = Vec::with_capacity(n * self.dim());
        for k in 0..n {
            data.extend_from_slice(self.row(k * len / n));
        }
        SampleSet {
            labels: self.labels.clone(),
            data,
            provenance: self.provenance.clone(),
            log_evidence: self.log_evidence,
        }
    }

    /// Row selection by index list, e.g. for permutation tests.
    pub fn select(&self, indices: &[usize]) -> SampleSet {
        let mut data = Vec::with_capacity(indices.len() * self.dim());
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        SampleSet {
            labels: self.labels.clone(),
            data,
            provenance: self.provenance.clone(),
            log_evidence: self.log_evidence,
        }
    }
}
