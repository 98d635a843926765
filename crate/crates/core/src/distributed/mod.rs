//! Message-passing simulation of the distributed solvers.
//!
//! Sources, edges and learners only exchange data through messages that
//! travel along paths. Learners estimate gradient coordinates from the rates
//! they observe and send them upstream; the inner direction (or projection)
//! problem is solved by synchronous primal-dual rounds in [`engine`].

pub mod engine;
pub mod network;

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use engine::{Inner, Network, PdConfig, RoundRow};
pub use network::{Entity, LocalityAudit};

use crate::central::{fw_steps, GradientSummary, SolverTrace, TraceStep};
use crate::error::{Error, Result};
use crate::gradient::{estimate_learner, truncation_for, EstimatorParams, GradientEstimate};
use crate::instance::Instance;
use crate::objective::whitenings;

/// Result of a distributed solve.
#[derive(Clone, Debug)]
pub struct DistOutput {
    pub lambda: Vec<f64>,
    pub trace: SolverTrace,
    pub audit: LocalityAudit,
    /// Per-round state, filled when tracing.
    pub rounds: Vec<RoundRow>,
    pub messages: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Baseline {
    /// Maximum throughput.
    Tp,
    /// α = 2 fairness.
    Fair,
}

/// Inner direction problem alone: `argmax ⟨v, g⟩` over the θ-relaxed set,
/// with `g` held by the learners.
pub fn pd_inner(inst: &Instance, gradient: &[f64], cfg: &PdConfig) -> Result<DistOutput> {
    if gradient.len() != inst.num_paths() || gradient.iter().any(|g| !g.is_finite()) {
        return Err(Error::Parameter("gradient must be finite with one entry per path".into()));
    }
    let mut net = Network::new(inst, cfg.keep_log);
    let per_learner = by_learner(inst, gradient);
    let g = net.deliver_gradients(&per_learner);
    let v = net.run(Inner::Linear { gradient: &g }, cfg)?;
    finish(net, v, SolverTrace::default())
}

fn by_learner(inst: &Instance, per_path: &[f64]) -> Vec<Vec<f64>> {
    (0..inst.num_learners()).map(|l| inst.learner_rates(per_path, l)).collect()
}

fn finish(net: Network<'_>, lambda: Vec<f64>, trace: SolverTrace) -> Result<DistOutput> {
    net.audit.check()?;
    Ok(DistOutput { lambda, trace, messages: net.router.sent, audit: net.audit, rounds: net.rows })
}

/// Every learner estimates its own gradient coordinates from the rates it
/// observes, truncating at its own `n'`.
fn learner_gradients(net: &mut Network<'_>, lambda: &[f64], params: &EstimatorParams, iteration: u64) -> GradientEstimate {
    let inst = net.inst;
    let views = net.announce_rates(lambda);
    let whit = whitenings(inst);
    let mut values = Vec::with_capacity(inst.num_learners());
    let mut stderr = vec![0.0; inst.num_paths()];
    for (l, rates) in views.iter().enumerate() {
        let top = rates.iter().fold(0.0f64, |a, &b| a.max(b));
        let n_prime = truncation_for(top * inst.config.horizon);
        let est = estimate_learner(inst, &whit[l], l, rates, n_prime, params, iteration);
        for (s, &(_, se)) in est.iter().enumerate() {
            stderr[inst.path_to(l, s)] = se;
        }
        values.push(est.into_iter().map(|x| x.0).collect::<Vec<_>>());
    }
    let g = net.deliver_gradients(&values);
    GradientEstimate { g, stderr }
}

/// Distributed Frank-Wolfe: each outer step solves the direction problem by
/// exp-penalty primal-dual rounds and moves `λ_p ← λ_p + γ v_p` locally.
pub fn dfw_solve(inst: &Instance, k: usize, cfg: &PdConfig, params: &EstimatorParams) -> Result<DistOutput> {
    if k == 0 {
        return Err(Error::Parameter("K must be at least 1".into()));
    }
    let start = Instant::now();
    let mut net = Network::new(inst, cfg.keep_log);
    let mut lambda = vec![0.0; inst.num_paths()];
    let mut trace = SolverTrace::default();
    for (i, gamma) in fw_steps(k).into_iter().enumerate() {
        let est = learner_gradients(&mut net, &lambda, params, i as u64);
        let v = net.run(Inner::Linear { gradient: &est.g }, cfg)?;
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
    finish(net, lambda, trace)
}

/// Distributed PGA: each projection is solved by standard primal-dual
/// rounds on `−½‖y − (λ + γ ĝ)‖²`.
pub fn dpga_solve(inst: &Instance, k: usize, gamma: f64, cfg: &PdConfig, params: &EstimatorParams) -> Result<DistOutput> {
    if !(gamma > 0.0) {
        return Err(Error::Parameter("PGA step must be positive".into()));
    }
    let start = Instant::now();
    let mut net = Network::new(inst, cfg.keep_log);
    let mut lambda = vec![0.0; inst.num_paths()];
    let mut trace = SolverTrace::default();
    for i in 0..k {
        let est = learner_gradients(&mut net, &lambda, params, i as u64);
        let y = net.run(Inner::Projection { lambda: &lambda, gradient: &est.g, gamma }, cfg)?;
        let target = lambda.iter().zip(&est.g).map(|(l, g)| l + gamma * g).collect();
        lambda = y;
        trace.steps.push(TraceStep {
            iteration: i,
            lambda: lambda.clone(),
            direction: target,
            step: gamma,
            gradient: GradientSummary::of(&est),
            elapsed_s: start.elapsed().as_secs_f64(),
        });
    }
    finish(net, lambda, trace)
}

/// Distributed baselines: MaxTP on the exp-penalty engine with unit
/// gradients, MaxFair on the standard engine.
pub fn dmax_solve(inst: &Instance, objective: Baseline, cfg: &PdConfig) -> Result<DistOutput> {
    let mut net = Network::new(inst, cfg.keep_log);
    let v = match objective {
        Baseline::Tp => {
            let ones = vec![vec![1.0; inst.num_sources()]; inst.num_learners()];
            let g = net.deliver_gradients(&ones);
            net.run(Inner::Linear { gradient: &g }, cfg)?
        }
        Baseline::Fair => net.run(Inner::Fair, cfg)?,
    };
    finish(net, v, SolverTrace::default())
}
