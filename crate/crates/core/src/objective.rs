//! D-optimal utility, its Monte Carlo estimate, MAP estimation and the
//! estimation-error metric.
//!
//! `G` is the log-determinant of the normalized posterior information (see
//! [`crate::info`]), so `G(empty) = 0` and the utility of the zero allocation
//! is exactly zero.
//!
//! Monte Carlo draws use common random numbers: arrival counts come from the
//! Poisson inverse CDF of a fixed uniform per `(learner, replicate, source)`,
//! and features are read in order from a stream per
//! `(learner, replicate, feature replicate, source)`. Raising a rate only
//! appends samples, so differences between nearby allocations are paired.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::info::{InfoMatrix, Whitening};
use crate::instance::Instance;
use crate::rng::{self, StreamRng};

const KEY_COUNT: u64 = 0xC0;
const KEY_FEATURE: u64 = 0xFE;
const KEY_MODEL: u64 = 0xB7;
const KEY_DATA: u64 = 0xDA;

/// Mean of i.i.d. replicates with its standard error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub replicates: Vec<f64>,
}

impl Estimate {
    pub fn from_replicates(replicates: Vec<f64>) -> Estimate {
        let (mean, stderr) = mean_stderr(&replicates);
        Estimate { mean, stderr, replicates }
    }

    /// Paired difference `self - other` over common replicates.
    pub fn paired_diff(&self, other: &Estimate) -> Estimate {
        assert_eq!(self.replicates.len(), other.replicates.len());
        Estimate::from_replicates(self.replicates.iter().zip(&other.replicates).map(|(a, b)| a - b).collect())
    }
}

pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Poisson(mean) quantile at `u`; nondecreasing in both arguments.
pub fn poisson_inv(mean: f64, u: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let ln_mean = mean.ln();
    let mut log_pmf = -mean;
    let mut cdf = log_pmf.exp();
    let mut k = 0usize;
    let cap = (mean + 40.0 * mean.sqrt() + 40.0) as usize;
    while cdf < u && k < cap {
        k += 1;
        log_pmf += ln_mean - (k as f64).ln();
        cdf += log_pmf.exp();
    }
    k
}

/// Arrival counts and raw features received by one learner.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleBatch {
    /// `features[s]` holds one d-vector per sample from source `s`.
    pub features: Vec<Vec<Vec<f64>>>,
}

impl SampleBatch {
    pub fn empty(sources: usize) -> Self {
        SampleBatch { features: vec![Vec::new(); sources] }
    }

    pub fn counts(&self) -> Vec<usize> {
        self.features.iter().map(|f| f.len()).collect()
    }
}

/// Draws `n_s ~ Poisson(rates[s] T)` and `x ~ N(0, Σ_s)` for every source.
pub fn sample_batch<R: Rng>(inst: &Instance, rates: &[f64], rng: &mut R) -> SampleBatch {
    let cfg = &inst.config;
    let features = rates
        .iter()
        .enumerate()
        .map(|(s, &r)| {
            let n = poisson_inv(r * cfg.horizon, rng.random::<f64>());
            (0..n)
                .map(|_| {
                    cfg.source_var[s]
                        .iter()
                        .map(|v| v.sqrt() * rng.sample::<f64, _>(StandardNormal))
                        .collect()
                })
                .collect()
        })
        .collect();
    SampleBatch { features }
}

fn check_prior(prior_var: &[f64]) -> Result<()> {
    if prior_var.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::Parameter("prior covariance must be positive semidefinite".into()));
    }
    Ok(())
}

/// `log det(Σ₀ (Σ_i x xᵀ/σ² + Σ₀⁻¹))` for a learner with diagonal prior
/// `prior_var`; `noise_var[s]` is the noise variance of source `s`.
pub fn g_value(prior_var: &[f64], batch: &SampleBatch, noise_var: &[f64]) -> Result<f64> {
    check_prior(prior_var)?;
    let d = prior_var.len();
    let mut info = InfoMatrix::identity(d);
    let mut z = vec![0.0; d];
    for (s, feats) in batch.features.iter().enumerate() {
        for x in feats {
            whiten(prior_var, x, noise_var[s], &mut z);
            info.push(&mut z);
        }
    }
    Ok(info.logdet())
}

fn whiten(prior_var: &[f64], x: &[f64], noise_var: f64, out: &mut [f64]) {
    let sd = noise_var.sqrt();
    for ((o, xi), v) in out.iter_mut().zip(x).zip(prior_var) {
        *o = xi * v.sqrt() / sd;
    }
}

/// Adds one raw sample to `info` and returns `log(1 + zᵀ M⁻¹ z)`.
pub fn marginal_gain(info: &mut InfoMatrix, prior_var: &[f64], x: &[f64], noise_var: f64) -> f64 {
    let mut z = vec![0.0; x.len()];
    whiten(prior_var, x, noise_var, &mut z);
    info.push(&mut z)
}

/// Per-learner whitening tables for an instance.
pub fn whitenings(inst: &Instance) -> Vec<Whitening> {
    (0..inst.num_learners())
        .map(|l| {
            let noise: Vec<f64> = (0..inst.num_sources()).map(|s| inst.noise_var(l, s)).collect();
            Whitening::new(&inst.config.prior_var[l], &inst.config.source_var, &noise)
        })
        .collect()
}

/// One whitened feature draw.
pub(crate) fn draw_whitened(scale: &[f64], rng: &mut StreamRng, z: &mut [f64]) {
    for (zi, sc) in z.iter_mut().zip(scale) {
        *zi = sc * rng.sample::<f64, _>(StandardNormal);
    }
}

/// Pushes `count` whitened draws from `rng` into `info`.
pub(crate) fn push_draws(info: &mut InfoMatrix, scale: &[f64], count: usize, rng: &mut StreamRng, z: &mut [f64]) {
    for _ in 0..count {
        draw_whitened(scale, rng, z);
        info.push(z);
    }
}

/// Monte Carlo estimate of `U(λ) = Σ_ℓ E[G]`: `n1` arrival replicates, each
/// averaged over `n2` feature replicates. The returned replicates are the
/// per-arrival-draw totals, which are i.i.d.
pub fn utility_mc(inst: &Instance, lambda: &[f64], n1: usize, n2: usize, seed: u64) -> Estimate {
    assert!(n1 >= 1 && n2 >= 1, "need at least one replicate");
    let d = inst.d();
    let t = inst.config.horizon;
    let whit = whitenings(inst);
    let mut info = InfoMatrix::identity(d);
    let mut z = vec![0.0; d];
    let mut totals = vec![0.0; n1];
    for l in 0..inst.num_learners() {
        let rates = inst.learner_rates(lambda, l);
        for (j, total) in totals.iter_mut().enumerate() {
            let counts: Vec<usize> = rates
                .iter()
                .enumerate()
                .map(|(s, &r)| {
                    let u = rng::stream(seed, &[KEY_COUNT, l as u64, j as u64, s as u64]).random::<f64>();
                    poisson_inv(r.max(0.0) * t, u)
                })
                .collect();
            if counts.iter().all(|&c| c == 0) {
                continue;
            }
            let mut acc = 0.0;
            for k in 0..n2 {
                info.reset();
                for (s, &c) in counts.iter().enumerate() {
                    if c > 0 {
                        let mut r = rng::stream(seed, &[KEY_FEATURE, l as u64, j as u64, k as u64, s as u64]);
                        push_draws(&mut info, &whit[l].scale[s], c, &mut r, &mut z);
                    }
                }
                acc += info.logdet();
            }
            *total += acc / n2 as f64;
        }
    }
    Estimate::from_replicates(totals)
}

/// MAP estimate `(XᵀΣ̃⁻¹X + Σ₀⁻¹)⁻¹(XᵀΣ̃⁻¹y + Σ₀⁻¹β₀)`, computed in whitened
/// form so that zero prior variances are allowed. `labels[s]` pairs with
/// `batch.features[s]`.
pub fn map_estimate(
    prior_mean: &[f64],
    prior_var: &[f64],
    batch: &SampleBatch,
    labels: &[Vec<f64>],
    noise_var: &[f64],
) -> Result<Vec<f64>> {
    check_prior(prior_var)?;
    let d = prior_mean.len();
    let mut zs: Vec<f64> = Vec::new();
    let mut resid: Vec<f64> = Vec::new();
    for (s, feats) in batch.features.iter().enumerate() {
        let sd = noise_var[s].sqrt();
        for (x, y) in feats.iter().zip(&labels[s]) {
            let pred: f64 = x.iter().zip(prior_mean).map(|(a, b)| a * b).sum();
            resid.push((y - pred) / sd);
            zs.extend(x.iter().zip(prior_var).map(|(xi, v)| xi * v.sqrt() / sd));
        }
    }
    let n = resid.len();
    if n == 0 {
        return Ok(prior_mean.to_vec());
    }
    // Rows of Z are whitened samples.
    let z = DMatrix::from_row_slice(n, d, &zs);
    let r = DVector::from_vec(resid);
    let w = if n <= d {
        let gram = DMatrix::identity(n, n) + &z * z.transpose();
        let chol = gram.cholesky().ok_or_else(|| Error::Parameter("singular MAP system".into()))?;
        z.transpose() * chol.solve(&r)
    } else {
        let info = DMatrix::identity(d, d) + z.transpose() * &z;
        let chol = info.cholesky().ok_or_else(|| Error::Parameter("singular MAP system".into()))?;
        chol.solve(&(z.transpose() * r))
    };
    Ok(prior_mean.iter().zip(prior_var).zip(w.iter()).map(|((m, v), wi)| m + v.sqrt() * wi).collect())
}

/// Mean normalized MAP error `‖β̂ − β‖ / ‖β‖` over learners. Each learner's
/// ground truth is drawn from its own prior `reps_model` times; for each
/// draw, `reps_data` datasets are generated at rates `λ`. Replicates are the
/// per-model-draw means.
pub fn estimation_error(inst: &Instance, lambda: &[f64], reps_data: usize, reps_model: usize, seed: u64) -> Result<Estimate> {
    let cfg = &inst.config;
    let d = cfg.d;
    let mut per_model = Vec::with_capacity(reps_model);
    for m in 0..reps_model {
        let mut sum = 0.0;
        let mut count = 0usize;
        for l in 0..inst.num_learners() {
            let mut mrng = rng::stream(seed, &[KEY_MODEL, m as u64, l as u64]);
            let beta: Vec<f64> = (0..d)
                .map(|i| cfg.prior_mean[l][i] + cfg.prior_var[l][i].sqrt() * mrng.sample::<f64, _>(StandardNormal))
                .collect();
            let norm = beta.iter().map(|b| b * b).sum::<f64>().sqrt();
            if norm == 0.0 {
                continue;
            }
            let rates = inst.learner_rates(lambda, l);
            let noise: Vec<f64> = (0..inst.num_sources()).map(|s| inst.noise_var(l, s)).collect();
            for q in 0..reps_data {
                let mut drng = rng::stream(seed, &[KEY_DATA, m as u64, q as u64, l as u64]);
                let batch = sample_batch(inst, &rates, &mut drng);
                let labels: Vec<Vec<f64>> = batch
                    .features
                    .iter()
                    .enumerate()
                    .map(|(s, feats)| {
                        feats
                            .iter()
                            .map(|x| {
                                let mean: f64 = x.iter().zip(&beta).map(|(a, b)| a * b).sum();
                                mean + noise[s].sqrt() * drng.sample::<f64, _>(StandardNormal)
                            })
                            .collect()
                    })
                    .collect();
                let est = map_estimate(&cfg.prior_mean[l], &cfg.prior_var[l], &batch, &labels, &noise)?;
                let err = est.iter().zip(&beta).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                sum += err / norm;
                count += 1;
            }
        }
        if count > 0 {
            per_model.push(sum / count as f64);
        }
    }
    Ok(Estimate::from_replicates(per_model))
}
