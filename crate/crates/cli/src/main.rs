//! `hbprog`: hierarchical Bayesian prognostics from the command line.
//!
//! Every subcommand reads a JSON run configuration, writes its artifacts
//! under `--out`, and prints a one-line summary. Failures print a JSON error
//! record on stderr and exit with 1 (usage), 2 (data) or 3 (numerical).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use hbprog::hierarchy::{
    classical_update, fit_historical, model_select, update_current, Candidate, GaussianPrior, SelectionEntry,
};
use hbprog::io::{
    generate_synthetic, load_dataset, load_samples, save_dataset, save_samples, write_atomic, write_json, RunConfig,
    CODE_VERSION,
};
use hbprog::prognostics::{predict_trajectory, rul_distribution, Bands};
use hbprog::samplers::derive_seed;
use hbprog::{
    DataKind, Dataset, Error, ErrorCategory, Interval, ModelFamily, PriorCase, PrognosisConfig, PrognosisResult,
    Result, SampleSet, SamplerKind,
};

#[derive(Debug, Parser)]
#[command(name = "hbprog", version, about = "Hierarchical Bayesian degradation prognostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Current time t_c in cycles; overrides the configuration.
    #[arg(long, global = true)]
    cutoff: Option<f64>,
    /// Model family; overrides the configuration.
    #[arg(long, global = true)]
    model: Option<Family>,
    /// Hierarchical prior case; overrides the configuration.
    #[arg(long, global = true)]
    case: Option<Case>,
    /// Stage-2 sampler; overrides the configuration.
    #[arg(long, global = true)]
    sampler: Option<Sampler>,
    /// Posterior samples per run; overrides the configuration.
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Hyper-posterior samples for `fit-current` (default `<out>/hyper.csv`).
    #[arg(long, global = true)]
    hyper: Option<PathBuf>,
    /// Posterior samples for `predict` and `rul` (default `<out>/current.csv`).
    #[arg(long, global = true)]
    posterior: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic fleet from `synthetic` in the configuration.
    Synth,
    /// Stage-1 and stage-2 inference on the historical datasets.
    FitHistorical,
    /// Update the current unit with the hyper-posterior as prior.
    FitCurrent,
    /// Predictive quantile bands of the degradation trajectory.
    Predict,
    /// Remaining-useful-life distribution at t_c.
    Rul,
    /// Rank candidate families by log-evidence.
    ModelSelect,
    /// Update the current unit with a literature Gaussian prior instead.
    ComparePrior,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Family {
    Paris,
    BattSingle,
    BattDouble,
    BattConst,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Case {
    Diag,
    Corr,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Sampler {
    Slice,
    Tmcmc,
}

/// Common envelope of every JSON artifact.
#[derive(Serialize)]
struct Artifact<'a, T: Serialize> {
    command: &'a str,
    code_version: &'a str,
    config_fingerprint: String,
    seed: u64,
    result: T,
}

#[derive(Serialize)]
struct Column {
    label: String,
    mean: f64,
    sd: f64,
    q025: f64,
    q975: f64,
}

#[derive(Serialize)]
struct PosteriorSummary {
    samples: String,
    n_samples: usize,
    columns: Vec<Column>,
    #[serde(skip_serializing_if = "Option::is_none")]
    log_evidence: Option<hbprog::LogEvidence>,
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    error: &'a str,
    category: &'a str,
    message: String,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            report("usage", "usage", e.kind().to_string());
            return ExitCode::from(1);
        }
    };
    match run(&cli) {
        Ok(line) => {
            println!("{line}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let (category, code) = match e.category() {
                ErrorCategory::Usage => ("usage", 1),
                ErrorCategory::Data => ("data", 2),
                ErrorCategory::Numerical => ("numerical", 3),
            };
            report(e.kind(), category, e.to_string());
            ExitCode::from(code)
        }
    }
}

fn report(kind: &str, category: &str, message: String) {
    let record = ErrorRecord { error: kind, category, message };
    eprintln!("{}", serde_json::to_string(&record).expect("error record serializes"));
}

fn run(cli: &Cli) -> Result<String> {
    let cfg = settings(cli)?;
    std::fs::create_dir_all(&cli.out).map_err(|source| Error::Io { path: cli.out.clone(), source })?;
    match cli.command {
        Command::Synth => synth(cli, &cfg),
        Command::FitHistorical => fit_historical_cmd(cli, &cfg),
        Command::FitCurrent => fit_current_cmd(cli, &cfg),
        Command::Predict => predict_cmd(cli, &cfg),
        Command::Rul => rul_cmd(cli, &cfg),
        Command::ModelSelect => model_select_cmd(cli, &cfg),
        Command::ComparePrior => compare_prior_cmd(cli, &cfg),
    }
}

/// Configuration file merged with command-line overrides.
fn settings(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(f) = cli.model {
        let name = f.to_possible_value().expect("named variant").get_name().to_string();
        // keep configured nominal values when the family is unchanged
        if name != cfg.model.name() {
            cfg.model = ModelFamily::from_name(&name).expect("known family");
        }
    }
    if let Some(c) = cli.case {
        cfg.case = match c {
            Case::Diag => PriorCase::Diag,
            Case::Corr => PriorCase::Corr,
        };
    }
    if let Some(s) = cli.sampler {
        cfg.stage2_sampler = match s {
            Sampler::Slice => SamplerKind::Slice,
            Sampler::Tmcmc => SamplerKind::Tmcmc,
        };
    }
    if let Some(n) = cli.samples {
        cfg.sampler.n_samples = n;
        if let Some(s2) = cfg.stage2.as_mut() {
            s2.n_samples = n;
        }
    }
    if let Some(c) = cli.cutoff {
        cfg.cutoff = Some(c);
    }
    Ok(cfg)
}

fn artifact<T: Serialize>(command: &'static str, cfg: &RunConfig, result: T) -> Artifact<'static, T> {
    Artifact { command, code_version: CODE_VERSION, config_fingerprint: cfg.fingerprint(), seed: cfg.seed, result }
}

fn summarize(samples: &SampleSet, path: &Path) -> PosteriorSummary {
    let (mean, sd) = (samples.mean(), samples.std_dev());
    let columns = samples
        .labels()
        .iter()
        .enumerate()
        .map(|(j, l)| Column {
            label: l.clone(),
            mean: mean[j],
            sd: sd[j],
            q025: samples.quantile(j, 0.025),
            q975: samples.quantile(j, 0.975),
        })
        .collect();
    PosteriorSummary {
        samples: path.display().to_string(),
        n_samples: samples.len(),
        columns,
        log_evidence: samples.log_evidence,
    }
}

fn brief(samples: &SampleSet, count: usize) -> String {
    let mean = samples.mean();
    samples.labels().iter().zip(&mean).take(count).map(|(l, m)| format!("{l}={m:.4}")).collect::<Vec<_>>().join(" ")
}

fn synth(cli: &Cli, cfg: &RunConfig) -> Result<String> {
    let spec = cfg.synthetic.as_ref().ok_or_else(|| Error::invalid("configuration has no `synthetic` section"))?;
    let (datasets, truth) = generate_synthetic(spec, cfg.seed)?;
    for d in &datasets {
        save_dataset(&cli.out.join(format!("{}.csv", d.id)), d)?;
    }
    let truth_path = cli.out.join("truth.json");
    write_json(&truth_path, &artifact("synth", cfg, &truth))?;
    Ok(format!("synth: {} datasets written to {} (truth: {})", datasets.len(), cli.out.display(), truth_path.display()))
}

fn load_all(paths: &[PathBuf]) -> Result<Vec<Dataset>> {
    if paths.is_empty() {
        return Err(Error::invalid("configuration lists no historical datasets"));
    }
    paths.iter().map(|p| load_dataset(p)).collect()
}

fn fit_historical_cmd(cli: &Cli, cfg: &RunConfig) -> Result<String> {
    let data = load_all(&cfg.historical)?;
    let family = &cfg.model;
    let res = fit_historical(
        &data,
        family,
        &cfg.stage1_bounds_for(family)?,
        &cfg.layout()?,
        &cfg.hyper_bounds_for(family),
        &cfg.fit_options(),
    )?;
    let mut stage1 = Vec::new();
    for (id, s) in res.dataset_ids.iter().zip(&res.stage1) {
        let p = cli.out.join(format!("stage1_{id}.csv"));
        save_samples(&p, s)?;
        stage1.push(summarize(s, &p));
    }
    let hyper_path = cli.out.join("hyper.csv");
    save_samples(&hyper_path, &res.hyper)?;

    #[derive(Serialize)]
    struct Summary {
        model: String,
        case: PriorCase,
        datasets: Vec<String>,
        fit_fingerprint: String,
        hyper: PosteriorSummary,
        stage1: Vec<PosteriorSummary>,
    }
    let summary = Summary {
        model: family.name().into(),
        case: cfg.case,
        datasets: res.dataset_ids.clone(),
        fit_fingerprint: res.fingerprint.clone(),
        hyper: summarize(&res.hyper, &hyper_path),
        stage1,
    };
    write_json(&cli.out.join("fit_historical.json"), &artifact("fit-historical", cfg, summary))?;
    Ok(format!(
        "fit-historical: {} datasets, {} hyper samples -> {} ({})",
        data.len(),
        res.hyper.len(),
        hyper_path.display(),
        brief(&res.hyper, family.theta_dim())
    ))
}

/// Current dataset truncated at the cutoff, and the cutoff actually used.
fn current_data(cfg: &RunConfig) -> Result<(Dataset, f64)> {
    let path = cfg.current.as_ref().ok_or_else(|| Error::invalid("configuration names no `current` dataset"))?;
    let full = load_dataset(path)?;
    match cfg.cutoff {
        Some(t) => Ok((full.truncated(t), t)),
        // t_c defaults to the latest observed cycle
        None => {
            let t = full.last_cycle().unwrap_or(0.0);
            Ok((full, t))
        }
    }
}

fn fit_current_cmd(cli: &Cli, cfg: &RunConfig) -> Result<String> {
    let (current, t_c) = current_data(cfg)?;
    let hyper_path = cli.hyper.clone().unwrap_or_else(|| cli.out.join("hyper.csv"));
    let hyper = load_samples(&hyper_path)?;
    let model = current.bind(&cfg.model)?;
    let sampler = hbprog::SamplerConfig { seed: derive_seed(cfg.seed, 3, 0), ..cfg.sampler.clone() };
    let post = update_current(&current, &hyper, &cfg.layout()?, &model, &sampler, cfg.mixture_keep)?;
    let out = cli.out.join("current.csv");
    save_samples(&out, &post)?;

    #[derive(Serialize)]
    struct Summary {
        dataset: String,
        t_c: f64,
        n_points: usize,
        hyper: String,
        posterior: PosteriorSummary,
    }
    let summary = Summary {
        dataset: current.id.clone(),
        t_c,
        n_points: current.len(),
        hyper: hyper_path.display().to_string(),
        posterior: summarize(&post, &out),
    };
    write_json(&cli.out.join("fit_current.json"), &artifact("fit-current", cfg, summary))?;
    Ok(format!(
        "fit-current: {} with {} points up to t_c={t_c} -> {} ({})",
        current.id,
        current.len(),
        out.display(),
        brief(&post, cfg.model.theta_dim() + 1)
    ))
}

fn compare_prior_cmd(cli: &Cli, cfg: &RunConfig) -> Result<String> {
    let (current, t_c) = current_data(cfg)?;
    let model = current.bind(&cfg.model)?;
    let prior = match (&cfg.literature_prior, &cfg.model) {
        (Some(p), _) => p.clone(),
        (None, ModelFamily::Paris { .. }) => GaussianPrior::literature_crack(),
        (None, f) => return Err(Error::invalid(format!("no literature prior configured for family {}", f.name()))),
    };
    let sigma_bounds = cfg.sigma_bounds.unwrap_or(Interval::new(0.0, cfg.sigma_upper_for(&cfg.model)));
    let sampler = hbprog::SamplerConfig { seed: derive_seed(cfg.seed, 5, 0), ..cfg.sampler.clone() };
    let post = classical_update(&current, &prior, sigma_bounds, &model, &sampler)?;
    let out = cli.out.join("classical.csv");
    save_samples(&out, &post)?;

    #[derive(Serialize)]
    struct Summary {
        dataset: String,
        t_c: f64,
        prior: GaussianPrior,
        sigma_bounds: Interval,
        posterior: PosteriorSummary,
    }
    let summary = Summary { dataset: current.id.clone(), t_c, prior, sigma_bounds, posterior: summarize(&post, &out) };
    write_json(&cli.out.join("compare_prior.json"), &artifact("compare-prior", cfg, summary))?;
    Ok(format!(
        "compare-prior: {} under the literature prior -> {} ({})",
        current.id,
        out.display(),
        brief(&post, cfg.model.theta_dim() + 1)
    ))
}

fn prognosis_config(cfg: &RunConfig, current: &Dataset, t_c: f64) -> Result<PrognosisConfig> {
    let threshold = cfg
        .prognosis
        .threshold
        .or(current.meta.threshold)
        .ok_or_else(|| Error::invalid("no failure threshold in the configuration or dataset metadata"))?;
    let p = PrognosisConfig {
        threshold,
        t_c,
        horizon: cfg.prognosis.horizon,
        quantiles: cfg.prognosis.quantiles.clone(),
        include_observation_noise: cfg.prognosis.include_observation_noise,
        seed: derive_seed(cfg.seed, 4, 0),
    };
    p.validate()?;
    Ok(p)
}

fn posterior(cli: &Cli) -> Result<SampleSet> {
    load_samples(&cli.posterior.clone().unwrap_or_else(|| cli.out.join("current.csv")))
}

fn predict_cmd(cli: &Cli, cfg: &RunConfig) -> Result<String> {
    let (current, t_c) = current_data(cfg)?;
    let model = current.bind(&cfg.model)?;
    let samples = posterior(cli)?;
    let pcfg = prognosis_config(cfg, &current, t_c)?;
    let n = cfg.prognosis.grid_points.max(2);
    let start = match current.meta.kind {
        DataKind::Crack => current.meta.geometry.map_or(0.0, |g| g.n0),
        DataKind::Battery => 1.0,
    };
    let mut grid: Vec<f64> =
        (0..n).map(|i| (start + (pcfg.horizon - start) * i as f64 / (n - 1) as f64).round()).collect();
    grid.dedup();
    let bands = predict_trajectory(&samples, &model, &grid, &pcfg)?;
    write_atomic(&cli.out.join("bands.csv"), bands_csv(&bands).as_bytes())?;
    let result = PrognosisResult {
        model: cfg.model.name().into(),
        units: current.meta.units.clone(),
        config: pcfg,
        bands: Some(bands),
        rul: None,
        fingerprint: cfg.fingerprint(),
    };
    let path = cli.out.join("prediction.json");
    write_json(&path, &artifact("predict", cfg, &result))?;
    Ok(format!(
        "predict: {} samples on {} grid cycles -> {} and {}",
        samples.len(),
        grid.len(),
        path.display(),
        cli.out.join("bands.csv").display()
    ))
}

/// Plot-ready table: one row per grid cycle, one column per quantile.
fn bands_csv(bands: &Bands) -> String {
    let mut out = String::from("cycle");
    for q in &bands.quantiles {
        out.push_str(&format!(",q{q}"));
    }
    out.push('\n');
    for (k, row) in bands.grid.iter().zip(&bands.values) {
        out.push_str(&k.to_string());
        for v in row {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

fn rul_cmd(cli: &Cli, cfg: &RunConfig) -> Result<String> {
    let (current, t_c) = current_data(cfg)?;
    let model = current.bind(&cfg.model)?;
    let samples = posterior(cli)?;
    let pcfg = prognosis_config(cfg, &current, t_c)?;
    let rul = rul_distribution(&samples, &model, &pcfg)?;
    let s = rul.summary.clone();
    let result = PrognosisResult {
        model: cfg.model.name().into(),
        units: current.meta.units.clone(),
        config: pcfg,
        bands: None,
        rul: Some(rul),
        fingerprint: cfg.fingerprint(),
    };
    let path = cli.out.join("rul.json");
    write_json(&path, &artifact("rul", cfg, &result))?;
    let flag = s.flag.map(|f| format!(" [{f}]")).unwrap_or_default();
    Ok(format!(
        "rul: t_c={t_c} mean={:.1} median={:.1} {:.0}% interval [{:.1}, {:.1}] censored={:.1}% -> {}{flag}",
        s.mean,
        s.median,
        100.0 * (s.interval.1 - s.interval.0),
        s.lower,
        s.upper,
        100.0 * s.censored_fraction,
        path.display()
    ))
}

fn model_select_cmd(cli: &Cli, cfg: &RunConfig) -> Result<String> {
    let data = load_all(&cfg.historical)?;
    let candidates: Vec<Candidate> = cfg
        .candidates
        .iter()
        .map(|f| {
            Ok(Candidate {
                family: f.clone(),
                stage1_bounds: cfg.stage1_bounds_for(f)?,
                layout: cfg.layout_for(f)?,
                hyper_bounds: cfg.hyper_bounds_for(f),
            })
        })
        .collect::<Result<_>>()?;
    let ranked: Vec<SelectionEntry> = model_select(&data, &candidates, &cfg.fit_options())?;
    let path = cli.out.join("model_select.json");
    write_json(&path, &artifact("model-select", cfg, &ranked))?;
    let table: Vec<String> = ranked
        .iter()
        .map(|e| match e.log_evidence {
            Some(l) => format!("{} {:.2}", e.family, l.value),
            None => format!("{} failed", e.family),
        })
        .collect();
    Ok(format!("model-select: {} -> {}", table.join(" > "), path.display()))
}
