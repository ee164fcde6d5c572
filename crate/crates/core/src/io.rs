//! File formats, run configuration and the synthetic fleet generator.
//!
//! A dataset is a CSV file with header `cycle,value` next to a sidecar
//! `<stem>.meta.json` holding [`DatasetMeta`]. A sample set is a CSV file
//! whose header is the parameter labels, next to `<stem>.meta.json` holding
//! [`SampleMeta`]. Every write goes to a temporary file that is then renamed.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::data::{check_point, Dataset, DatasetMeta};
use crate::degradation::{CrackGeometry, DataKind, DegradationModel, Eol, LikelihoodKind, LoadingSpec, ModelFamily};
use crate::error::{Error, Result};
use crate::hierarchy::{default_hyper_bounds, default_sigma_upper, default_stage1_bounds, FitOptions, GaussianPrior, SamplerKind};
use crate::samplers::{derive_seed, fingerprint_json, rng_from_seed, Interval, LogEvidence, Provenance, SampleSet, SamplerConfig};
use crate::targets::{HyperLayout, HyperParameters, HyperPriorBounds, PriorCase, PriorKernel};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

/// Path of the metadata sidecar for `path`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.meta.json"))
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.as_file().sync_all().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e.error })?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| Error::Format { path: path.to_path_buf(), message: e.to_string() })?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse { path: path.to_path_buf(), line: e.line(), message: e.to_string() })
}

fn read_meta<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| {
        let msg = e.to_string();
        match msg.strip_prefix("missing field `").and_then(|r| r.split('`').next()) {
            Some(field) => Error::MissingField { path: path.to_path_buf(), field: field.to_string() },
            None => Error::Parse { path: path.to_path_buf(), line: e.line(), message: msg },
        }
    })
}

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse { path: path.to_path_buf(), line, message: e.to_string() }
}

fn parse_f64(path: &Path, line: usize, field: &str, what: &str) -> Result<f64> {
    field.parse::<f64>().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("cannot parse {what} {field:?} as a number"),
    })
}

/// Reads a dataset and its metadata sidecar. The dataset id is the file stem.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let meta: DatasetMeta = read_meta(&sidecar_path(path))?;
    let mut rdr = csv_reader(path)?;
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.len() != 2 || &headers[0] != "cycle" || &headers[1] != "value" {
        return Err(Error::Parse { path: path.to_path_buf(), line: 1, message: "header must be `cycle,value`".into() });
    }
    let (mut cycles, mut values) = (Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != 2 {
            return Err(Error::Parse { path: path.to_path_buf(), line, message: format!("expected 2 fields, found {}", rec.len()) });
        }
        let k = parse_f64(path, line, &rec[0], "cycle")?;
        let v = parse_f64(path, line, &rec[1], "value")?;
        check_point(k, v, cycles.last().copied())
            .map_err(|message| Error::Parse { path: path.to_path_buf(), line, message })?;
        cycles.push(k);
        values.push(v);
    }
    let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Dataset::new(id, cycles, values, meta)
}

/// Writes a dataset as `cycle,value` CSV plus its metadata sidecar.
pub fn save_dataset(path: &Path, dataset: &Dataset) -> Result<()> {
    let mut out = String::from("cycle,value\n");
    for (k, v) in dataset.cycles().iter().zip(dataset.values()) {
        out.push_str(&format!("{k},{v}\n"));
    }
    write_atomic(path, out.as_bytes())?;
    write_json(&sidecar_path(path), &dataset.meta)
}

/// Sidecar of a persisted sample set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub labels: Vec<String>,
    pub n_samples: usize,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_evidence: Option<LogEvidence>,
    pub code_version: String,
}

pub fn save_samples(path: &Path, samples: &SampleSet) -> Result<()> {
    let mut out = samples.labels().join(",");
    out.push('\n');
    for row in samples.rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())?;
    let meta = SampleMeta {
        labels: samples.labels().to_vec(),
        n_samples: samples.len(),
        provenance: samples.provenance.clone(),
        log_evidence: samples.log_evidence,
        code_version: CODE_VERSION.into(),
    };
    write_json(&sidecar_path(path), &meta)
}

/// Reads a sample set; the sidecar is optional for hand-made files.
pub fn load_samples(path: &Path) -> Result<SampleSet> {
    let mut rdr = csv_reader(path)?;
    let labels: Vec<String> = rdr.headers().map_err(|e| csv_error(path, e))?.iter().map(String::from).collect();
    let mut data = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != labels.len() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("expected {} fields, found {}", labels.len(), rec.len()),
            });
        }
        for f in rec.iter() {
            let v = parse_f64(path, line, f, "sample")?;
            if !v.is_finite() {
                return Err(Error::Parse { path: path.to_path_buf(), line, message: "non-finite sample".into() });
            }
            data.push(v);
        }
    }
    let mut set = SampleSet::from_flat(labels, data)
        .map_err(|e| Error::Format { path: path.to_path_buf(), message: e.to_string() })?;
    let side = sidecar_path(path);
    if side.exists() {
        let meta: SampleMeta = read_meta(&side)?;
        if meta.labels != set.labels() {
            return Err(Error::Format { path: side, message: "sidecar labels differ from CSV header".into() });
        }
        set = set.with_provenance(meta.provenance);
        set.log_evidence = meta.log_evidence;
    }
    Ok(set)
}

/// Ground truth generating a synthetic fleet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    #[serde(flatten)]
    pub family: ModelFamily,
    pub psi: HyperParameters,
    pub sigma_upper: f64,
    pub n_units: usize,
    /// Observation cycles shared by every unit.
    pub cycles: Vec<f64>,
    /// Overrides each unit's σ for the added noise; `0` gives exact curves.
    #[serde(default)]
    pub noise_level: Option<f64>,
    #[serde(default)]
    pub geometry: Option<CrackGeometry>,
    #[serde(default)]
    pub loading: Option<LoadingSpec>,
    /// Failure threshold; crack defaults to `a_f`.
    #[serde(default)]
    pub threshold: Option<f64>,
    /// Drop observations past the first threshold crossing.
    #[serde(default = "yes")]
    pub stop_at_threshold: bool,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_prefix")]
    pub id_prefix: String,
}

fn yes() -> bool {
    true
}
fn default_horizon() -> f64 {
    1e7
}
fn default_prefix() -> String {
    "unit".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitTruth {
    pub id: String,
    pub theta: Vec<f64>,
    pub sigma: f64,
    /// Noise-free end of life; `None` if beyond the horizon.
    pub eol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub spec: SyntheticSpec,
    pub seed: u64,
    pub units: Vec<UnitTruth>,
}

const UNIT_ATTEMPTS: usize = 100;

/// Draws a fleet ψ* → θ_i → noisy series.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<(Vec<Dataset>, GroundTruth)> {
    spec.psi.validate()?;
    if spec.psi.mu0.len() != spec.family.theta_dim() {
        return Err(Error::invalid("true hyper-parameters do not match the family dimension"));
    }
    if spec.cycles.is_empty() {
        return Err(Error::invalid("synthetic spec needs at least one cycle"));
    }
    let kernel = PriorKernel::new(&spec.psi, spec.sigma_upper)?;
    let (meta, crack) = match spec.family.kind() {
        DataKind::Crack => {
            let g = spec.geometry.ok_or_else(|| Error::invalid("crack synthesis needs geometry"))?;
            let l = spec.loading.ok_or_else(|| Error::invalid("crack synthesis needs loading"))?;
            let mut m = DatasetMeta::crack(g, l);
            m.threshold = Some(spec.threshold.unwrap_or(g.a_f));
            (m, Some((g, l)))
        }
        DataKind::Battery => (DatasetMeta::battery(spec.threshold.unwrap_or(1.4)), None),
    };
    let mut meta = meta;
    meta.family = Some(spec.family.name().into());
    let threshold = meta.threshold.expect("threshold set above");
    let model = spec.family.bind(crack)?;
    let direction = model.crossing();
    let likelihood = model.likelihood();
    let d = spec.family.theta_dim();

    let mut datasets = Vec::with_capacity(spec.n_units);
    let mut truth = Vec::with_capacity(spec.n_units);
    for i in 0..spec.n_units {
        let id = format!("{}{}", spec.id_prefix, i + 1);
        let mut rng = rng_from_seed(derive_seed(seed, 0x5a17, i as u64));
        let mut made = None;
        for _ in 0..UNIT_ATTEMPTS {
            let point = kernel.sample(&mut rng);
            let (theta, sigma) = (&point[..d], point[d]);
            let noise = spec.noise_level.unwrap_or(sigma);
            if let Some((cycles, values)) = simulate(&model, theta, noise, likelihood, spec, threshold, direction, &mut rng) {
                made = Some((point.clone(), cycles, values));
                break;
            }
        }
        let (point, cycles, values) =
            made.ok_or_else(|| Error::Inference(format!("no admissible parameter draw for {id} after {UNIT_ATTEMPTS} attempts")))?;
        let eol = match model.end_of_life(&point[..d], threshold, -1.0, spec.horizon)? {
            Eol::At(t) => Some(t),
            Eol::Censored => None,
        };
        datasets.push(Dataset::new(id.clone(), cycles, values, meta.clone())?);
        truth.push(UnitTruth { id, theta: point[..d].to_vec(), sigma: point[d], eol });
    }
    Ok((datasets, GroundTruth { spec: spec.clone(), seed, units: truth }))
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    model: &dyn DegradationModel,
    theta: &[f64],
    noise: f64,
    likelihood: LikelihoodKind,
    spec: &SyntheticSpec,
    threshold: f64,
    direction: crate::degradation::Crossing,
    rng: &mut crate::samplers::SamplerRng,
) -> Option<(Vec<f64>, Vec<f64>)> {
    use rand::Rng;
    let (mut cycles, mut values) = (Vec::new(), Vec::new());
    for &k in &spec.cycles {
        let pred = match model.predict(theta, k) {
            Ok(v) if v.is_finite() && v > 0.0 => v,
            Err(crate::degradation::ModelError::Diverged { .. }) if spec.stop_at_threshold => break,
            _ => return None,
        };
        if spec.stop_at_threshold && direction.crossed(pred, threshold) {
            break;
        }
        let y = if noise > 0.0 {
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            match likelihood {
                LikelihoodKind::Gaussian => pred + noise * z,
                LikelihoodKind::LogNormal => {
                    let r = noise / pred;
                    let zeta2 = (r * r).ln_1p();
                    (pred.ln() - 0.5 * zeta2 + zeta2.sqrt() * z).exp()
                }
            }
        } else {
            pred
        };
        if !(y > 0.0) || !y.is_finite() {
            return None;
        }
        cycles.push(k);
        values.push(y);
    }
    (!cycles.is_empty()).then_some((cycles, values))
}

/// Prognosis settings of a run; threshold falls back to the dataset metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrognosisSettings {
    pub threshold: Option<f64>,
    pub horizon: f64,
    pub quantiles: Vec<f64>,
    pub include_observation_noise: bool,
    /// Number of points in the trajectory grid.
    pub grid_points: usize,
}

impl Default for PrognosisSettings {
    fn default() -> Self {
        Self {
            threshold: None,
            horizon: 100_000.0,
            quantiles: vec![0.025, 0.5, 0.975],
            include_observation_noise: false,
            grid_points: 200,
        }
    }
}

/// Everything a CLI run needs besides its command-line flags. Relative
/// dataset paths are resolved against the directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub model: ModelFamily,
    pub case: PriorCase,
    pub sigma_upper: Option<f64>,
    pub stage1_bounds: Option<Vec<Interval>>,
    pub hyper_bounds: Option<HyperPriorBounds>,
    pub stage2_sampler: SamplerKind,
    pub sampler: SamplerConfig,
    /// Sampler settings for stage 2; defaults to `sampler`.
    pub stage2: Option<SamplerConfig>,
    pub stage1_keep: Option<usize>,
    pub mixture_keep: Option<usize>,
    pub seed: u64,
    pub historical: Vec<PathBuf>,
    pub current: Option<PathBuf>,
    pub cutoff: Option<f64>,
    pub prognosis: PrognosisSettings,
    pub literature_prior: Option<GaussianPrior>,
    pub sigma_bounds: Option<Interval>,
    /// Families compared by `model-select`.
    pub candidates: Vec<ModelFamily>,
    /// Stage-1 bounds keyed by family name, for candidates other than `model`.
    pub family_bounds: BTreeMap<String, Vec<Interval>>,
    pub synthetic: Option<SyntheticSpec>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelFamily::from_name("paris").expect("known family"),
            case: PriorCase::Diag,
            sigma_upper: None,
            stage1_bounds: None,
            hyper_bounds: None,
            stage2_sampler: SamplerKind::Slice,
            sampler: SamplerConfig::default(),
            stage2: None,
            stage1_keep: None,
            mixture_keep: None,
            seed: 0,
            historical: Vec::new(),
            current: None,
            cutoff: None,
            prognosis: PrognosisSettings::default(),
            literature_prior: None,
            sigma_bounds: None,
            candidates: Vec::new(),
            family_bounds: BTreeMap::new(),
            synthetic: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: RunConfig = read_json(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &PathBuf| if p.is_relative() { base.join(p) } else { p.clone() };
        cfg.historical = cfg.historical.iter().map(resolve).collect();
        cfg.current = cfg.current.as_ref().map(resolve);
        Ok(cfg)
    }

    pub fn fingerprint(&self) -> String {
        fingerprint_json(self)
    }

    pub fn sigma_upper_for(&self, family: &ModelFamily) -> f64 {
        self.sigma_upper.unwrap_or_else(|| default_sigma_upper(family.kind()))
    }

    pub fn layout_for(&self, family: &ModelFamily) -> Result<HyperLayout> {
        HyperLayout::new(family.theta_dim(), self.case, self.sigma_upper_for(family))
    }

    pub fn layout(&self) -> Result<HyperLayout> {
        self.layout_for(&self.model)
    }

    /// Stage-1 bounds for `family`; battery families must configure them.
    pub fn stage1_bounds_for(&self, family: &ModelFamily) -> Result<Vec<Interval>> {
        if family == &self.model {
            if let Some(b) = &self.stage1_bounds {
                return Ok(b.clone());
            }
        }
        if let Some(b) = self.family_bounds.get(family.name()) {
            return Ok(b.clone());
        }
        default_stage1_bounds(family).ok_or_else(|| {
            Error::invalid(format!("stage1_bounds must be configured for family {}", family.name()))
        })
    }

    pub fn hyper_bounds_for(&self, family: &ModelFamily) -> HyperPriorBounds {
        match (&self.hyper_bounds, family == &self.model) {
            (Some(b), true) => b.clone(),
            _ => default_hyper_bounds(family),
        }
    }

    pub fn fit_options(&self) -> FitOptions {
        let stage2 = self.stage2.clone().unwrap_or_else(|| self.sampler.clone());
        FitOptions {
            stage1: SamplerConfig { seed: derive_seed(self.seed, 1, 0), ..self.sampler.clone() },
            stage2: SamplerConfig { seed: derive_seed(self.seed, 2, 0), ..stage2 },
            stage2_sampler: self.stage2_sampler,
            stage1_keep: self.stage1_keep,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn repeated_cycle_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b1.csv");
        fs::write(&p, "cycle,value\n1,1.9\n2,1.8\n2,1.7\n").unwrap();
        write_json(&sidecar_path(&p), &DatasetMeta::battery(1.4)).unwrap();
        match load_dataset(&p).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 4),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn missing_meta_field_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b1.csv");
        fs::write(&p, "cycle,value\n1,1.9\n").unwrap();
        fs::write(sidecar_path(&p), r#"{"kind":"battery"}"#).unwrap();
        match load_dataset(&p).unwrap_err() {
            Error::MissingField { field, .. } => assert_eq!(field, "units"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn run_config_defaults_parse() {
        let cfg: RunConfig = serde_json::from_str(r#"{"model":{"family":"batt-double"},"case":"diag"}"#).unwrap();
        assert_eq!(cfg.model.name(), "batt-double");
        assert!(cfg.stage1_bounds_for(&cfg.model).is_err());
        assert_eq!(cfg.layout().unwrap().sigma_upper, 0.4);
    }
}
