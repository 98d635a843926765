//! Synchronous primal-dual rounds over the simulated network.
//!
//! Each round runs five barrier-separated phases:
//! 1. sources push their primal iterate downstream with the data;
//! 2. every edge forms its per-group θ-norms and its constraint penalty;
//! 3. learners send control messages upstream that collect `(q_e, norm)`;
//! 4. edges update `q_e`;
//! 5. sources update `r`, `u` and the primal iterate.
//!
//! Edges report the θ-norm `(v_{s,t}^e)^{1/θ}` instead of the raw power sum,
//! so the primal term `(v^e)^{(1−θ)/θ} (v^p)^{θ−1}` is evaluated as
//! `(v^p / norm)^{θ−1}`, which cannot overflow.

use serde::{Deserialize, Serialize};

use super::network::{Direction, EdgeReport, Entity, LocalityAudit, Message, Payload, ReadRecord, Router};
use crate::error::{Error, Result};
use crate::instance::{combine, Instance};

/// Largest exponent accepted before a round is declared unstable.
const MAX_EXPONENT: f64 = 700.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PdConfig {
    pub theta: f64,
    pub rounds: usize,
    /// Primal step `m`.
    pub step_primal: f64,
    /// Edge dual step `k`.
    pub step_edge: f64,
    /// Source dual step `h`.
    pub step_source: f64,
    /// Nonnegativity dual step `w`.
    pub step_nonneg: f64,
    /// Initial primal value; the exp-penalty update is singular at 0.
    pub init: f64,
    /// Standard engine: clip each primal to `[0, min(λ_{s,t}, min_e μ_e)]`
    /// instead of dualizing nonnegativity.
    pub box_projection: bool,
    /// Record per-round state.
    pub trace: bool,
    /// Keep every audited read, not only violations.
    pub keep_log: bool,
}

impl Default for PdConfig {
    fn default() -> Self {
        PdConfig {
            theta: 10.0,
            rounds: 1000,
            step_primal: 0.01,
            step_edge: 0.01,
            step_source: 0.01,
            step_nonneg: 0.01,
            init: 1e-6,
            box_projection: true,
            trace: false,
            keep_log: false,
        }
    }
}

impl PdConfig {
    /// All four stepsizes set to `step`.
    pub fn with_step(step: f64) -> Self {
        PdConfig { step_primal: step, step_edge: step, step_source: step, step_nonneg: step, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let steps = [self.step_primal, self.step_edge, self.step_source, self.step_nonneg];
        if steps.iter().any(|s| !(*s > 0.0) || !s.is_finite()) || !(self.theta >= 1.0) || !(self.init >= 0.0) {
            return Err(Error::Parameter("stepsizes must be positive, θ >= 1 and init >= 0".into()));
        }
        Ok(())
    }
}

/// Inner problem solved by one primal-dual run.
#[derive(Clone, Copy, Debug)]
pub enum Inner<'a> {
    /// `max ⟨v, g⟩` with exp-penalty duals; `g` per path as received by the
    /// sources.
    Linear { gradient: &'a [f64] },
    /// `max −½‖y − (λ + γ g)‖²` with standard duals; `λ` is each source's
    /// own allocation.
    Projection { lambda: &'a [f64], gradient: &'a [f64], gamma: f64 },
    /// `max −Σ_ℓ 1/Σ_s y_s^ℓ` with standard duals; learners compute the
    /// objective gradient from the rates they observe.
    Fair,
}

/// One row of the per-round state trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRow {
    pub round: usize,
    pub entity: String,
    pub variable: String,
    pub value: f64,
}

/// Fair-objective floor on a learner's total incoming rate.
pub const FAIR_EPS: f64 = 1e-6;

/// Router, audit and trace shared by all runs of one distributed solve.
pub struct Network<'a> {
    pub inst: &'a Instance,
    pub router: Router<'a>,
    pub audit: LocalityAudit,
    pub rows: Vec<RoundRow>,
    /// Rounds executed so far, across runs.
    pub round: usize,
}

impl<'a> Network<'a> {
    pub fn new(inst: &'a Instance, keep_log: bool) -> Self {
        Network {
            inst,
            router: Router::new(inst),
            audit: if keep_log { LocalityAudit::with_log() } else { LocalityAudit::default() },
            rows: Vec::new(),
            round: 0,
        }
    }

    fn read(&mut self, reader: Entity, owner: Entity, variable: &'static str, via: Option<usize>) {
        let rec = ReadRecord { round: self.round, reader, owner, variable, via };
        self.audit.record(self.inst, rec);
    }

    /// Sources announce their allocated rates; returns each learner's view
    /// `λ_s^ℓ` indexed by source.
    pub fn announce_rates(&mut self, lambda: &[f64]) -> Vec<Vec<f64>> {
        let inst = self.inst;
        let mut view = vec![vec![0.0; inst.num_sources()]; inst.num_learners()];
        for (p, path) in inst.paths.paths.iter().enumerate() {
            let msg = Message { path: p, direction: Direction::Downstream, origin: Entity::Source(path.source), payload: Payload::Rate(lambda[p]) };
            self.router.count();
            for hop in self.router.hops(&msg) {
                if let Entity::Learner(l) = hop {
                    self.read(hop, msg.origin, "lambda", Some(p));
                    if let Payload::Rate(x) = msg.payload {
                        view[l][path.source] = x;
                    }
                }
            }
        }
        view
    }

    /// Learners send `per_learner[ℓ][s]` upstream; returns the per-path
    /// values as received at the sources.
    pub fn deliver_gradients(&mut self, per_learner: &[Vec<f64>]) -> Vec<f64> {
        let inst = self.inst;
        let mut out = vec![0.0; inst.num_paths()];
        for (p, path) in inst.paths.paths.iter().enumerate() {
            let msg = Message {
                path: p,
                direction: Direction::Upstream,
                origin: Entity::Learner(path.learner),
                payload: Payload::Gradient(per_learner[path.learner][path.source]),
            };
            self.router.count();
            let end = self.router.endpoint(p, Direction::Upstream);
            self.read(end, msg.origin, "gradient", Some(p));
            if let Payload::Gradient(g) = msg.payload {
                out[p] = g;
            }
        }
        out
    }

    /// Runs `cfg.rounds` rounds and returns the sources' final primal values.
    pub fn run(&mut self, inner: Inner<'_>, cfg: &PdConfig) -> Result<Vec<f64>> {
        cfg.validate()?;
        let inst = self.inst;
        let np = inst.num_paths();
        let theta = cfg.theta;
        let exp_engine = matches!(inner, Inner::Linear { .. });

        // Source state.
        let mut v = vec![cfg.init; np];
        let mut u = vec![0.0; np];
        let mut r = vec![0.0; inst.num_groups()];
        let mut reports: Vec<Vec<EdgeReport>> = vec![Vec::new(); np];
        let mut learner_value = vec![0.0; np];
        // Edge state.
        let mut q = vec![0.0; inst.num_edges()];
        let mut fetched: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); inst.num_edges()];
        let mut norms: Vec<Vec<(usize, f64)>> = vec![Vec::new(); inst.num_edges()];
        let mut penalty = vec![0.0; inst.num_edges()];
        // Learner state: primal values seen on incoming paths.
        let mut seen = vec![vec![0.0; inst.num_sources()]; inst.num_learners()];

        for _ in 0..cfg.rounds {
            self.round += 1;
            let round = self.round;

            // Phase 1: primal values ride downstream with the data.
            for (p, path) in inst.paths.paths.iter().enumerate() {
                let msg = Message { path: p, direction: Direction::Downstream, origin: Entity::Source(path.source), payload: Payload::Primal(v[p]) };
                self.router.count();
                let Payload::Primal(x) = msg.payload else { unreachable!() };
                for hop in self.router.hops(&msg) {
                    self.read(hop, msg.origin, "v", Some(p));
                    match hop {
                        Entity::Edge(e) => fetched[e].push((p, inst.group_of_path(p), x)),
                        Entity::Learner(l) => seen[l][path.source] = x,
                        Entity::Source(_) => {}
                    }
                }
            }

            // Phase 2: edge aggregates.
            for e in 0..inst.num_edges() {
                if fetched[e].is_empty() {
                    continue;
                }
                let f = &mut fetched[e];
                f.sort_by_key(|&(p, g, _)| (g, p));
                norms[e].clear();
                let mut i = 0;
                while i < f.len() {
                    let g = f[i].1;
                    let j = i + f[i..].iter().take_while(|x| x.1 == g).count();
                    norms[e].push((g, combine(f[i..j].iter().map(|x| x.2), Some(theta))));
                    i = j;
                }
                f.clear();
                let excess = norms[e].iter().map(|x| x.1).sum::<f64>() - inst.capacity(e);
                penalty[e] = if exp_engine {
                    if excess > MAX_EXPONENT || !excess.is_finite() {
                        return Err(Error::Overflow { round, detail: format!("edge {e} exponent {excess:.3e}") });
                    }
                    excess.exp()
                } else {
                    excess
                };
            }

            // Phase 3: control messages collect edge state on the way up.
            for (p, path) in inst.paths.paths.iter().enumerate() {
                let l = path.learner;
                let value = match inner {
                    Inner::Fair => {
                        let total: f64 = seen[l].iter().sum::<f64>().max(FAIR_EPS);
                        Some(1.0 / (total * total))
                    }
                    _ => None,
                };
                let group = inst.group_of_path(p);
                let mut msg = Message {
                    path: p,
                    direction: Direction::Upstream,
                    origin: Entity::Learner(l),
                    payload: Payload::Collected { reports: Vec::with_capacity(path.edges.len()), learner_value: value },
                };
                self.router.count();
                for hop in self.router.hops(&msg) {
                    match hop {
                        Entity::Edge(e) => {
                            let norm = norms[e].iter().find(|x| x.0 == group).map_or(0.0, |x| x.1);
                            if let Payload::Collected { reports, .. } = &mut msg.payload {
                                reports.push(EdgeReport { edge: e, q: q[e], capacity: inst.capacity(e), group_norm: norm, penalty: penalty[e] });
                            }
                        }
                        Entity::Source(_) => {
                            let Payload::Collected { reports: got, learner_value } = &msg.payload else { unreachable!() };
                            for rep in got {
                                self.read(hop, Entity::Edge(rep.edge), "q", Some(p));
                            }
                            if learner_value.is_some() {
                                self.read(hop, msg.origin, "objective gradient", Some(p));
                            }
                        }
                        Entity::Learner(_) => {}
                    }
                }
                let Payload::Collected { reports: got, learner_value: lv } = msg.payload else { unreachable!() };
                reports[p] = got;
                if let Some(x) = lv {
                    learner_value[p] = x;
                }
            }

            // Phase 4: edge duals.
            for e in 0..inst.num_edges() {
                if norms[e].is_empty() {
                    continue;
                }
                let grad = if exp_engine { penalty[e] - 1.0 } else { penalty[e] };
                q[e] = dual_step(q[e], cfg.step_edge, grad);
            }

            // Phase 5: source updates from own state and received reports.
            let mut next = v.clone();
            for (gi, group) in inst.paths.groups.iter().enumerate() {
                let rate = inst.group_rate(gi);
                let norm_g = combine(group.paths.iter().map(|&p| v[p]), Some(theta));
                let excess = norm_g - rate;
                let src_pen = if exp_engine {
                    if excess > MAX_EXPONENT || !excess.is_finite() {
                        return Err(Error::Overflow { round, detail: format!("group {gi} exponent {excess:.3e}") });
                    }
                    excess.exp()
                } else {
                    excess
                };
                for &p in &group.paths {
                    let vp = v[p];
                    let mut edge_term = 0.0;
                    for rep in &reports[p] {
                        let w = if exp_engine { rep.q * rep.penalty } else { rep.q };
                        edge_term += w * ratio_pow(vp, rep.group_norm, theta);
                    }
                    let src_term = r[gi] * if exp_engine { src_pen } else { 1.0 } * ratio_pow(vp, norm_g, theta);
                    let objective = match inner {
                        Inner::Linear { gradient } => gradient[p],
                        Inner::Projection { lambda, gradient, gamma } => lambda[p] + gamma * gradient[p] - vp,
                        Inner::Fair => learner_value[p],
                    };
                    let mut step = objective - edge_term - src_term;
                    let boxed = !exp_engine && cfg.box_projection;
                    if exp_engine {
                        step += u[p] * (-vp).exp();
                        u[p] = dual_step(u[p], cfg.step_nonneg, (-vp).exp() - 1.0);
                    } else if !boxed {
                        step += u[p];
                        u[p] = dual_step(u[p], cfg.step_nonneg, -vp);
                    }
                    let mut x = vp + cfg.step_primal * step;
                    if boxed {
                        let cap = reports[p].iter().map(|rep| rep.capacity).fold(rate, f64::min);
                        x = x.clamp(0.0, cap.max(0.0));
                    }
                    if !x.is_finite() {
                        return Err(Error::Overflow { round, detail: format!("primal on path {p} is {x}") });
                    }
                    next[p] = x;
                }
                r[gi] = dual_step(r[gi], cfg.step_source, if exp_engine { src_pen - 1.0 } else { src_pen });
            }
            v = next;

            if cfg.trace {
                self.trace_round(round, &v, &u, &r, &q, &norms);
            }
        }
        Ok(v)
    }

    fn trace_round(&mut self, round: usize, v: &[f64], u: &[f64], r: &[f64], q: &[f64], norms: &[Vec<(usize, f64)>]) {
        let inst = self.inst;
        for (p, path) in inst.paths.paths.iter().enumerate() {
            let who = Entity::Source(path.source).to_string();
            self.rows.push(RoundRow { round, entity: who.clone(), variable: format!("v[{p}]"), value: v[p] });
            self.rows.push(RoundRow { round, entity: who, variable: format!("u[{p}]"), value: u[p] });
        }
        for (g, group) in inst.paths.groups.iter().enumerate() {
            self.rows.push(RoundRow { round, entity: Entity::Source(group.source).to_string(), variable: format!("r[{g}]"), value: r[g] });
        }
        for e in 0..inst.num_edges() {
            if !norms[e].is_empty() {
                self.rows.push(RoundRow { round, entity: Entity::Edge(e).to_string(), variable: "q".into(), value: q[e] });
            }
        }
    }
}

/// `x + step·(y)^+_x`, kept nonnegative.
fn dual_step(x: f64, step: f64, y: f64) -> f64 {
    let y = if x > 0.0 { y } else { y.max(0.0) };
    (x + step * y).max(0.0)
}

/// `(v / norm)^{θ−1}`, the derivative of a θ-norm in one coordinate.
fn ratio_pow(v: f64, norm: f64, theta: f64) -> f64 {
    if norm <= 0.0 || v <= 0.0 {
        return 0.0;
    }
    (v / norm).min(1.0).powf(theta - 1.0)
}
