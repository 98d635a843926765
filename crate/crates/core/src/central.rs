//! Centralized solvers: the Frank-Wolfe variant, projected gradient ascent,
//! and the MaxTP / MaxFair baselines.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gradient::{estimate_gradient, EstimatorParams, GradientEstimate};
use crate::instance::Instance;
use crate::lp::{lp_linearize, simplex_max, LinearProgram};
use crate::qp::project_lp;

/// Rate floor keeping the α = 2 objective away from its pole.
pub const FAIR_FLOOR: f64 = 1e-6;

/// Summary of one gradient estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientSummary {
    pub norm: f64,
    pub max: f64,
    pub mean_stderr: f64,
}

impl GradientSummary {
    pub fn of(est: &GradientEstimate) -> Self {
        let n = est.g.len().max(1) as f64;
        GradientSummary {
            norm: est.g.iter().map(|x| x * x).sum::<f64>().sqrt(),
            max: est.g.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)),
            mean_stderr: est.stderr.iter().sum::<f64>() / n,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub iteration: usize,
    /// Allocation after the step.
    pub lambda: Vec<f64>,
    /// FW direction or PGA projection target.
    pub direction: Vec<f64>,
    pub step: f64,
    pub gradient: GradientSummary,
    pub elapsed_s: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverTrace {
    pub steps: Vec<TraceStep>,
}

impl SolverTrace {
    /// Sum of step sizes; exactly one after a complete FW run.
    pub fn total_step(&self) -> f64 {
        self.steps.iter().map(|s| s.step).sum()
    }
}

/// Step sizes `min(1/K, 1 − η)`, with the last one closing η to 1.
pub fn fw_steps(k: usize) -> Vec<f64> {
    let delta = 1.0 / k as f64;
    let mut eta = 0.0;
    (0..k)
        .map(|i| {
            let g = if i + 1 == k { 1.0 - eta } else { delta.min(1.0 - eta) };
            eta += g;
            g
        })
        .collect()
}

/// Frank-Wolfe variant from λ = 0 with K steps of size 1/K.
pub fn fw_solve(inst: &Instance, k: usize, params: &EstimatorParams) -> Result<(Vec<f64>, SolverTrace)> {
    if k == 0 {
        return Err(Error::Parameter("K must be at least 1".into()));
    }
    let start = Instant::now();
    let lp = lp_linearize(inst);
    let mut lambda = vec![0.0; inst.num_paths()];
    let mut trace = SolverTrace::default();
    for (i, gamma) in fw_steps(k).into_iter().enumerate() {
        let est = estimate_gradient(inst, &lambda, params, i as u64);
        let v = direction(inst, &lp, &est.g)?;
        for (l, vi) in lambda.iter_mut().zip(&v) {
            *l += gamma * vi;
        }
        trace.steps.push(TraceStep {
            iteration: i,
            lambda: lambda.clone(),
            direction: v,
            step: gamma,
            gradient: GradientSummary::of(&est),
            elapsed_s: start.elapsed().as_secs_f64(),
        });
    }
    Ok((lambda, trace))
}

fn direction(inst: &Instance, lp: &LinearProgram, gradient: &[f64]) -> Result<Vec<f64>> {
    if gradient.iter().any(|x| !x.is_finite()) {
        return Err(Error::Lp("gradient is not finite".into()));
    }
    let mut c = vec![0.0; lp.num_vars];
    c[..gradient.len()].copy_from_slice(gradient);
    let (x, _) = simplex_max(&c, lp)?;
    let mut v = x[..lp.num_paths].to_vec();
    let s = inst.feasible_scale(&v);
    if s < 1.0 {
        v.iter_mut().for_each(|x| *x *= s);
    }
    Ok(v)
}

/// Default PGA step: `scale` times the largest source rate.
pub fn pga_step(inst: &Instance, scale: f64) -> f64 {
    scale * inst.max_rate()
}

/// Projected gradient ascent `λ ← Π_D(λ + γ ĝ)` from λ = 0.
pub fn pga_solve(inst: &Instance, k: usize, gamma: f64, params: &EstimatorParams) -> Result<(Vec<f64>, SolverTrace)> {
    if !(gamma > 0.0) {
        return Err(Error::Parameter("PGA step must be positive".into()));
    }
    let start = Instant::now();
    let lp = lp_linearize(inst);
    let mut lambda = vec![0.0; inst.num_paths()];
    let mut trace = SolverTrace::default();
    for i in 0..k {
        let est = estimate_gradient(inst, &lambda, params, i as u64);
        let target: Vec<f64> = lambda.iter().zip(&est.g).map(|(l, g)| l + gamma * g).collect();
        lambda = project_lp(inst, &lp, &target)?;
        trace.steps.push(TraceStep {
            iteration: i,
            lambda: lambda.clone(),
            direction: target,
            step: gamma,
            gradient: GradientSummary::of(&est),
            elapsed_s: start.elapsed().as_secs_f64(),
        });
    }
    Ok((lambda, trace))
}

/// Maximum aggregate throughput `Σ_p λ_p` over D.
pub fn maxtp_solve(inst: &Instance) -> Result<Vec<f64>> {
    let lp = lp_linearize(inst);
    direction(inst, &lp, &vec![1.0; inst.num_paths()])
}

/// `−Σ_ℓ 1 / max(Σ_s λ_s^ℓ, ε)`.
pub fn fair_objective(inst: &Instance, lambda: &[f64]) -> f64 {
    (0..inst.num_learners()).map(|l| -1.0 / learner_total(inst, lambda, l).max(FAIR_FLOOR)).sum()
}

fn learner_total(inst: &Instance, lambda: &[f64], l: usize) -> f64 {
    inst.learner_rates(lambda, l).iter().sum()
}

fn fair_gradient(inst: &Instance, lambda: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; lambda.len()];
    for l in 0..inst.num_learners() {
        let y = learner_total(inst, lambda, l).max(FAIR_FLOOR);
        for s in 0..inst.num_sources() {
            g[inst.path_to(l, s)] = 1.0 / (y * y);
        }
    }
    g
}

/// α = 2 fair allocation by projected gradient with Armijo backtracking.
/// Starts from the largest uniform allocation, which keeps every learner
/// away from the pole when capacity allows. Coordinates are floored at ε on
/// return.
pub fn maxfair_solve(inst: &Instance, max_iter: usize) -> Result<Vec<f64>> {
    let lp = lp_linearize(inst);
    let ones = vec![1.0; inst.num_paths()];
    let start = inst.feasible_scale(&ones).min(inst.max_rate());
    let mut lambda: Vec<f64> = ones.iter().map(|x| x * start).collect();
    let mut f = fair_objective(inst, &lambda);
    let mut t = 1.0;
    for _ in 0..max_iter {
        let g = fair_gradient(inst, &lambda);
        let mut accepted = None;
        for _ in 0..100 {
            let target: Vec<f64> = lambda.iter().zip(&g).map(|(l, gi)| l + t * gi).collect();
            let next = project_lp(inst, &lp, &target)?;
            let step: Vec<f64> = next.iter().zip(&lambda).map(|(a, b)| a - b).collect();
            let gain: f64 = g.iter().zip(&step).map(|(a, b)| a * b).sum();
            let fnext = fair_objective(inst, &next);
            if fnext >= f + 1e-4 * gain {
                accepted = Some((next, step, fnext));
                break;
            }
            t *= 0.5;
        }
        let Some((next, step, fnext)) = accepted else {
            break;
        };
        let norm = step.iter().map(|x| x * x).sum::<f64>().sqrt();
        lambda = next;
        f = fnext;
        if norm < 1e-6 {
            return Ok(floor(lambda));
        }
        t *= 2.0;
    }
    if lambda.iter().all(|&x| x <= FAIR_FLOOR) {
        return Ok(floor(lambda));
    }
    Err(Error::NoConvergence(max_iter))
}

fn floor(lambda: Vec<f64>) -> Vec<f64> {
    lambda.into_iter().map(|x| x.max(FAIR_FLOOR)).collect()
}
