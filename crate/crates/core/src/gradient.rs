//! Truncated, sampled estimator of ∇U.
//!
//! For the path from source `s` to learner `ℓ`,
//! `∂U/∂λ = T Σ_n P[n_s = n] E[G(n_s = n + 1) − G(n_s = n)]`, where the
//! expectation is over the other sources' Poisson counts and all features.
//! The sum is cut at `n'` and the expectation sampled: `N1` draws of the
//! other counts, each with `N2` feature draws. Each feature draw runs one
//! chain: insert the other sources' samples, then `n' + 1` samples of `s`
//! one at a time, reading every difference off as a marginal gain.
//!
//! Streams are keyed by `(seed, iteration, s, t^ℓ, ℓ, j, k)`, so all
//! coordinates of one `(s, ℓ)` pair share draws and estimates are
//! independent of evaluation order.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::info::{InfoMatrix, Whitening};
use crate::instance::Instance;
use crate::objective::{draw_whitened, mean_stderr, poisson_inv, push_draws, whitenings};
use crate::quadrature::poisson_pmf;
use crate::rng;

const KEY_COUNT: u64 = 0x6C;
const KEY_FEATURE: u64 = 0x6F;
/// Pmf weights below this contribute nothing visible to a double-precision sum.
const PMF_CUTOFF: f64 = 1e-18;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorParams {
    pub n1: usize,
    pub n2: usize,
    /// Share feature draws between the two terms of each difference.
    pub coupled: bool,
    pub seed: u64,
}

impl Default for EstimatorParams {
    fn default() -> Self {
        EstimatorParams { n1: 50, n2: 50, coupled: true, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradientEstimate {
    pub g: Vec<f64>,
    pub stderr: Vec<f64>,
}

/// `max(⌈2 x⌉, 10)` for `x = max λ_s^ℓ T`.
pub fn truncation_for(max_mean: f64) -> usize {
    let two = 2.0 * max_mean;
    // Guard against 2 * 5.000000000000001 rounding up to 11.
    let c = (two - 1e-9 * two.max(1.0)).ceil();
    (c.max(0.0) as usize).max(10)
}

/// Truncation level at the current allocation.
pub fn truncation_level(inst: &Instance, lambda: &[f64]) -> usize {
    let max = lambda.iter().fold(0.0f64, |a, &b| a.max(b));
    truncation_for(max * inst.config.horizon)
}

/// Estimates every coordinate of ∇U at `lambda`.
pub fn estimate_gradient(inst: &Instance, lambda: &[f64], params: &EstimatorParams, iteration: u64) -> GradientEstimate {
    let n_prime = truncation_level(inst, lambda);
    let whit = whitenings(inst);
    let mut g = vec![0.0; inst.num_paths()];
    let mut stderr = vec![0.0; inst.num_paths()];
    for l in 0..inst.num_learners() {
        let rates = inst.learner_rates(lambda, l);
        let est = estimate_learner(inst, &whit[l], l, &rates, n_prime, params, iteration);
        for (s, (gs, se)) in est.into_iter().enumerate() {
            let p = inst.path_to(l, s);
            g[p] = gs;
            stderr[p] = se;
        }
    }
    GradientEstimate { g, stderr }
}

/// Estimates `∂U/∂λ_s^ℓ` for every source, using only the learner's own
/// incoming rates. Returns `(estimate, stderr)` per source.
pub fn estimate_learner(
    inst: &Instance,
    whit: &Whitening,
    learner: usize,
    rates: &[f64],
    n_prime: usize,
    params: &EstimatorParams,
    iteration: u64,
) -> Vec<(f64, f64)> {
    assert!(params.n1 >= 1 && params.n2 >= 1, "need at least one sample");
    let t = inst.config.horizon;
    let ty = inst.placement.learner_type[learner] as u64;
    let d = inst.d();
    let ns = rates.len();
    let reps = params.n1 * params.n2;
    let batches = reps.min(10);

    let mut info = InfoMatrix::identity(d);
    let mut z = vec![0.0; d];
    let mut out = Vec::with_capacity(ns);
    for s in 0..ns {
        let mean = rates[s].max(0.0) * t;
        let weights: Vec<f64> = (0..=n_prime).map(|n| poisson_pmf(mean, n)).collect();
        // Terms past the last visible weight need no samples.
        let last = weights.iter().rposition(|&w| w >= PMF_CUTOFF).unwrap_or(0);
        let key = |extra: &[u64]| {
            let mut k = vec![iteration, s as u64, ty, learner as u64];
            k.extend_from_slice(extra);
            k
        };

        let mut batch_sum = vec![0.0; batches];
        let mut batch_n = vec![0usize; batches];
        let mut gains_a = vec![0.0; last + 1];
        let mut gains_b = vec![0.0; last + 1];
        for j in 0..params.n1 {
            let counts: Vec<usize> = (0..ns)
                .map(|o| {
                    if o == s {
                        return 0;
                    }
                    let u = rng::stream(params.seed, &key(&[KEY_COUNT, j as u64, o as u64])).random::<f64>();
                    poisson_inv(rates[o].max(0.0) * t, u)
                })
                .collect();
            for k in 0..params.n2 {
                let base_a = run_chain(&mut info, whit, s, &counts, last + 1, params.seed, &key(&[KEY_FEATURE, j as u64, k as u64, 0]), &mut z, &mut gains_a);
                // Δ(n) = G(others, n + 1) − G(others, n).
                let mut value = 0.0;
                if params.coupled {
                    for n in 0..=last {
                        value += weights[n] * gains_a[n];
                    }
                } else {
                    // Independent draws for the two terms of each difference.
                    let base_b = run_chain(&mut info, whit, s, &counts, last, params.seed, &key(&[KEY_FEATURE, j as u64, k as u64, 1]), &mut z, &mut gains_b);
                    let (mut cum_a, mut cum_b) = (base_a, base_b);
                    for n in 0..=last {
                        cum_a += gains_a[n];
                        value += weights[n] * (cum_a - cum_b);
                        if n < last {
                            cum_b += gains_b[n];
                        }
                    }
                }
                let r = j * params.n2 + k;
                let b = r * batches / reps;
                batch_sum[b] += value * t;
                batch_n[b] += 1;
            }
        }
        let total: f64 = batch_sum.iter().sum::<f64>() / reps as f64;
        let means: Vec<f64> = batch_sum.iter().zip(&batch_n).map(|(s, &n)| s / n as f64).collect();
        let se = if batches > 1 { mean_stderr(&means).1 } else { 0.0 };
        out.push((total, se));
    }
    out
}

/// Fills `info` with the other sources' samples, then appends `extra`
/// samples of `source`, writing each marginal gain to `gains`. Returns the
/// log-determinant before the first sample of `source`.
#[allow(clippy::too_many_arguments)]
fn run_chain(
    info: &mut InfoMatrix,
    whit: &Whitening,
    source: usize,
    counts: &[usize],
    extra: usize,
    seed: u64,
    key: &[u64],
    z: &mut [f64],
    gains: &mut [f64],
) -> f64 {
    info.reset();
    for (o, &c) in counts.iter().enumerate() {
        if o != source && c > 0 {
            let mut k = key.to_vec();
            k.push(o as u64);
            let mut r = rng::stream(seed, &k);
            push_draws(info, &whit.scale[o], c, &mut r, z);
        }
    }
    let base = info.logdet();
    let mut k = key.to_vec();
    k.push(source as u64);
    let mut r = rng::stream(seed, &k);
    for g in gains.iter_mut().take(extra) {
        draw_whitened(&whit.scale[source], &mut r, z);
        *g = info.push(z);
    }
    base
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncation_examples() {
        assert_eq!(truncation_for(0.0), 10);
        assert_eq!(truncation_for(7.3), 15);
        assert_eq!(truncation_for(5.0), 10);
        assert_eq!(truncation_for(5.2), 11);
    }
}
