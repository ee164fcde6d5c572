use rand::Rng;
use rand_distr::Exp1;

use super::{rng_from_seed, Interval, Provenance, SampleSet, SamplerConfig, SamplerError, SamplerRng, TargetSpec};
use crate::math::cholesky_psd;

/// Coordinate-wise slice sampler (stepping out + shrinkage).
///
/// Returns `config.n_samples` draws kept after warm-up, one every
/// `config.thin` sweeps. Identical inputs give bit-identical output.
pub fn slice_sample(target: &TargetSpec<'_>, init: &[f64], config: &SamplerConfig) -> Result<SampleSet, SamplerError> {
    config.validate()?;
    let dim = target.dim();
    if init.len() != dim {
        return Err(SamplerError::Dimension { expected: dim, got: init.len() });
    }
    let widths = initial_widths(target, config)?;
    let mut x = init.to_vec();
    let mut fx = target.log_density(&x);
    if !fx.is_finite() {
        return Err(SamplerError::InitOutsideSupport { log_density: fx });
    }

    let mut rng = rng_from_seed(config.seed);
    let burn = config.burn_in_sweeps();
    let total = burn + config.n_samples * config.thin;
    let mut data = Vec::with_capacity(config.n_samples * dim);
    for sweep in 0..total {
        for (j, &w) in widths.iter().enumerate() {
            let s = target.support[j];
            if s.lo == s.hi {
                continue;
            }
            fx = update_coordinate(target, &mut x, fx, j, w, config, &mut rng)?;
        }
        if sweep >= burn && (sweep - burn + 1).is_multiple_of(config.thin) {
            data.extend_from_slice(&x);
        }
    }

    let provenance = Provenance {
        target: target.id.clone(),
        sampler: "slice".into(),
        config_hash: config.fingerprint(),
        seed: config.seed,
    };
    Ok(SampleSet::from_flat(target.labels.clone(), data)?.with_provenance(provenance))
}

/// Coordinate-wise slice sampling in whitened coordinates `x = init + L z`,
/// where `L Lᵀ` is a pilot estimate `scale` of the target covariance
/// (row-major, `dim × dim`). Strongly correlated targets then mix like
/// independent ones. Dimensions with zero pilot variance are held fixed.
pub fn slice_sample_whitened(
    target: &TargetSpec<'_>,
    init: &[f64],
    scale: &[f64],
    config: &SamplerConfig,
) -> Result<SampleSet, SamplerError> {
    let dim = target.dim();
    if init.len() != dim {
        return Err(SamplerError::Dimension { expected: dim, got: init.len() });
    }
    if scale.len() != dim * dim || scale.iter().any(|v| !v.is_finite()) {
        return Err(SamplerError::InvalidConfig("pilot covariance must be a finite dim × dim matrix".into()));
    }
    let mut cov = scale.to_vec();
    for j in 0..dim {
        if target.support[j].lo == target.support[j].hi {
            for k in 0..dim {
                cov[j * dim + k] = 0.0;
                cov[k * dim + j] = 0.0;
            }
        } else {
            // ridge so that a rank-deficient pilot keeps every direction
            cov[j * dim + j] *= 1.0 + 1e-6;
        }
    }
    let l = cholesky_psd(&cov, dim);
    let to_x = move |z: &[f64], base: &[f64]| -> Vec<f64> {
        (0..dim).map(|i| base[i] + (0..=i).map(|k| l[i * dim + k] * z[k]).sum::<f64>()).collect()
    };
    let support: Vec<Interval> = (0..dim)
        .map(|j| if cov[j * dim + j] > 0.0 { Interval::UNBOUNDED } else { Interval::new(0.0, 0.0) })
        .collect();
    let whitened = TargetSpec::new(target.id.clone(), target.labels.clone(), |z| {
        target.log_density(&to_x(z, init))
    })
    .with_support(support);
    let config = SamplerConfig { slice_widths: Some(vec![1.0; dim]), ..config.clone() };
    let z = slice_sample(&whitened, &vec![0.0; dim], &config)?;
    let rows: Vec<Vec<f64>> = z.rows().map(|r| to_x(r, init)).collect();
    let provenance = Provenance { sampler: "slice-whitened".into(), ..z.provenance.clone() };
    Ok(SampleSet::from_rows(target.labels.clone(), &rows)?.with_provenance(provenance))
}

fn initial_widths(target: &TargetSpec<'_>, config: &SamplerConfig) -> Result<Vec<f64>, SamplerError> {
    match &config.slice_widths {
        Some(w) if w.len() != target.dim() => Err(SamplerError::Dimension { expected: target.dim(), got: w.len() }),
        Some(w) => Ok(w.clone()),
        None => Ok(target
            .support
            .iter()
            .map(|s| if s.is_finite() { s.width() / 10.0 } else { 1.0 })
            .collect()),
    }
}

fn update_coordinate(
    target: &TargetSpec<'_>,
    x: &mut [f64],
    fx: f64,
    j: usize,
    width: f64,
    config: &SamplerConfig,
    rng: &mut SamplerRng,
) -> Result<f64, SamplerError> {
    let support = target.support[j];
    let x0 = x[j];
    let e: f64 = rng.sample(Exp1);
    let level = fx - e;
    let w = if width > 0.0 { width } else { f64::MIN_POSITIVE.max(support.width() / 10.0) };

    let eval = |v: f64, x: &mut [f64]| {
        x[j] = v;
        target.log_density(x)
    };

    // stepping out, Neal's budget split between the two ends
    let mut left = x0 - w * rng.random::<f64>();
    let mut right = left + w;
    let m = config.max_step_out;
    let mut steps_left = (m as f64 * rng.random::<f64>()).floor() as usize;
    let mut steps_right = m.saturating_sub(1).saturating_sub(steps_left);
    let mut left_open = false;
    let mut right_open = false;
    loop {
        if left <= support.lo {
            break;
        }
        if steps_left == 0 {
            left_open = eval(left, x) > level;
            break;
        }
        if eval(left, x) <= level {
            break;
        }
        left -= w;
        steps_left -= 1;
    }
    loop {
        if right >= support.hi {
            break;
        }
        if steps_right == 0 {
            right_open = eval(right, x) > level;
            break;
        }
        if eval(right, x) <= level {
            break;
        }
        right += w;
        steps_right -= 1;
    }
    if left_open && right_open && !support.lo.is_finite() && !support.hi.is_finite() {
        x[j] = x0;
        return Err(SamplerError::StepOutExhausted { dim: j, steps: m, width: w, x: x0 });
    }
    left = left.max(support.lo);
    right = right.min(support.hi);

    for _ in 0..config.max_shrink {
        let candidate = left + rng.random::<f64>() * (right - left);
        let fc = eval(candidate, x);
        if fc > level {
            return Ok(fc);
        }
        if candidate < x0 {
            left = candidate;
        } else {
            right = candidate;
        }
    }
    x[j] = x0;
    Err(SamplerError::ShrinkageExhausted { dim: j, steps: config.max_shrink, x: x0 })
}
