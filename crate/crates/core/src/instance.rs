//! Problem instances: topology plus statistics, and the multicast feasible set.
//!
//! A rate allocation is a dense vector with one coordinate per path, in
//! `PathSet` order. Constraints are kept structurally (edge to member paths
//! grouped by `(source, type)`), so the exact max form and the l_θ form are
//! evaluated from the same tables.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::{Graph, PathSet, Placement};

/// Statistical parameters. All covariances are diagonal and stored as
/// variance vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub d: usize,
    /// Acquisition horizon T.
    pub horizon: f64,
    /// `rates[s][t]`: generation rate λ_{s,t}.
    pub rates: Vec<Vec<f64>>,
    /// `source_var[s]`: diagonal of Σ_s.
    pub source_var: Vec<Vec<f64>>,
    /// `noise_var[s][t]`: label noise variance σ²_{s,t}.
    pub noise_var: Vec<Vec<f64>>,
    /// `prior_mean[l]`: β₀ of learner l.
    pub prior_mean: Vec<Vec<f64>>,
    /// `prior_var[l]`: diagonal of Σ₀ of learner l.
    pub prior_var: Vec<Vec<f64>>,
}

impl ProblemConfig {
    fn validate(&self, sources: usize, learners: usize, types: usize) -> Result<()> {
        let bad = |m: String| Err(Error::Instance(m));
        if self.d == 0 {
            return bad("feature dimension must be positive".into());
        }
        if !(self.horizon >= 0.0) || !self.horizon.is_finite() {
            return bad(format!("horizon {} must be finite and >= 0", self.horizon));
        }
        let table = |name: &str, t: &Vec<Vec<f64>>, rows: usize, cols: usize| -> Result<()> {
            if t.len() != rows || t.iter().any(|r| r.len() != cols) {
                return Err(Error::Instance(format!("{name} must be {rows} x {cols}")));
            }
            Ok(())
        };
        table("rates", &self.rates, sources, types)?;
        table("source_var", &self.source_var, sources, self.d)?;
        table("noise_var", &self.noise_var, sources, types)?;
        table("prior_mean", &self.prior_mean, learners, self.d)?;
        table("prior_var", &self.prior_var, learners, self.d)?;
        let nonneg = |t: &Vec<Vec<f64>>| t.iter().flatten().all(|&x| x >= 0.0 && x.is_finite());
        if !nonneg(&self.rates) {
            return bad("source rates must be finite and >= 0".into());
        }
        if !nonneg(&self.source_var) || !nonneg(&self.prior_var) {
            return bad("variances must be finite and >= 0".into());
        }
        if !self.noise_var.iter().flatten().all(|&x| x > 0.0 && x.is_finite()) {
            return bad("noise variances must be > 0".into());
        }
        if !self.prior_mean.iter().flatten().all(|x| x.is_finite()) {
            return bad("prior means must be finite".into());
        }
        Ok(())
    }
}

/// Which constraint a residual entry refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Constraint {
    Edge(usize),
    Source(usize),
    NonNeg(usize),
}

/// Paths of one `(source, type)` group that traverse a given edge.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeGroup {
    pub group: usize,
    pub paths: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct Instance {
    pub graph: Graph,
    pub placement: Placement,
    pub paths: PathSet,
    pub config: ProblemConfig,
    capacity: Vec<f64>,
    edge_groups: Vec<Vec<EdgeGroup>>,
    /// `learner_path[l][s]`: the path from source s to learner l.
    learner_path: Vec<Vec<usize>>,
}

impl Instance {
    /// Bundles the pieces, checking that every path is a walk over existing
    /// edges between its own source and learner, and that every edge has a
    /// capacity.
    pub fn new(graph: Graph, placement: Placement, paths: PathSet, config: ProblemConfig) -> Result<Instance> {
        let ns = placement.num_sources();
        let nl = placement.num_learners();
        let nt = placement.num_types;
        config.validate(ns, nl, nt)?;

        let mut capacity = Vec::with_capacity(graph.num_edges());
        for (i, e) in graph.edges().iter().enumerate() {
            match e.capacity {
                Some(c) => capacity.push(c),
                None => return Err(Error::Instance(format!("edge {i} has no capacity"))),
            }
        }
        for &n in placement.sources.iter().chain(&placement.learners) {
            if n >= graph.num_nodes() {
                return Err(Error::Instance(format!("placement references missing node {n}")));
            }
        }

        if paths.groups.len() != ns * nt {
            return Err(Error::Instance("path groups do not cover every (source, type)".into()));
        }
        let mut learner_path = vec![vec![usize::MAX; ns]; nl];
        for (pi, p) in paths.paths.iter().enumerate() {
            if p.source >= ns || p.learner >= nl || p.ty != placement.learner_type[p.learner] {
                return Err(Error::Instance(format!("path {pi} has inconsistent endpoints")));
            }
            if p.nodes.first() != Some(&placement.sources[p.source])
                || p.nodes.last() != Some(&placement.learners[p.learner])
                || p.nodes.len() != p.edges.len() + 1
            {
                return Err(Error::Instance(format!("path {pi} does not join its source and learner")));
            }
            for (hop, &e) in p.edges.iter().enumerate() {
                if e >= graph.num_edges() {
                    return Err(Error::Instance(format!("path {pi} references absent edge {e}")));
                }
                let edge = graph.edge(e);
                if edge.src != p.nodes[hop] || edge.dst != p.nodes[hop + 1] {
                    return Err(Error::Instance(format!("path {pi} hop {hop} does not match edge {e}")));
                }
            }
            if learner_path[p.learner][p.source] != usize::MAX {
                return Err(Error::Instance(format!("duplicate path for learner {} and source {}", p.learner, p.source)));
            }
            learner_path[p.learner][p.source] = pi;
        }
        if learner_path.iter().flatten().any(|&p| p == usize::MAX) {
            return Err(Error::Instance("some (source, learner) pair has no path".into()));
        }
        for (gi, g) in paths.groups.iter().enumerate() {
            if gi != g.source * nt + g.ty || g.paths.iter().any(|&p| paths.paths[p].source != g.source || paths.paths[p].ty != g.ty) {
                return Err(Error::Instance(format!("path group {gi} is inconsistent")));
            }
        }

        let mut edge_groups: Vec<Vec<EdgeGroup>> = vec![Vec::new(); graph.num_edges()];
        for (gi, g) in paths.groups.iter().enumerate() {
            for &pi in &g.paths {
                for &e in &paths.paths[pi].edges {
                    match edge_groups[e].iter_mut().find(|eg| eg.group == gi) {
                        Some(eg) => eg.paths.push(pi),
                        None => edge_groups[e].push(EdgeGroup { group: gi, paths: vec![pi] }),
                    }
                }
            }
        }

        Ok(Instance { graph, placement, paths, config, capacity, edge_groups, learner_path })
    }

    pub fn num_paths(&self) -> usize {
        self.paths.len()
    }

    pub fn num_sources(&self) -> usize {
        self.placement.num_sources()
    }

    pub fn num_learners(&self) -> usize {
        self.placement.num_learners()
    }

    pub fn num_types(&self) -> usize {
        self.placement.num_types
    }

    pub fn num_groups(&self) -> usize {
        self.paths.groups.len()
    }

    pub fn num_edges(&self) -> usize {
        self.graph.num_edges()
    }

    pub fn d(&self) -> usize {
        self.config.d
    }

    pub fn capacity(&self, edge: usize) -> f64 {
        self.capacity[edge]
    }

    pub fn capacities(&self) -> &[f64] {
        &self.capacity
    }

    /// λ_{s,t} for a group index.
    pub fn group_rate(&self, group: usize) -> f64 {
        let g = &self.paths.groups[group];
        self.config.rates[g.source][g.ty]
    }

    pub fn group_of_path(&self, path: usize) -> usize {
        let p = &self.paths.paths[path];
        p.source * self.num_types() + p.ty
    }

    /// Groups (with their member paths) that traverse `edge`.
    pub fn edge_groups(&self, edge: usize) -> &[EdgeGroup] {
        &self.edge_groups[edge]
    }

    pub fn path_to(&self, learner: usize, source: usize) -> usize {
        self.learner_path[learner][source]
    }

    /// Noise variance seen by `learner` on data from `source`.
    pub fn noise_var(&self, learner: usize, source: usize) -> f64 {
        self.config.noise_var[source][self.placement.learner_type[learner]]
    }

    /// Per-source incoming rates λ_s^ℓ of one learner.
    pub fn learner_rates(&self, lambda: &[f64], learner: usize) -> Vec<f64> {
        self.learner_path[learner].iter().map(|&p| lambda[p]).collect()
    }

    /// Largest λ_{s,t}; the natural scale of a rate allocation.
    pub fn max_rate(&self) -> f64 {
        self.config.rates.iter().flatten().fold(0.0, |a, &b| a.max(b))
    }

    pub fn num_constraints(&self) -> usize {
        self.num_edges() + self.num_groups() + self.num_paths()
    }

    pub fn constraint_kind(&self, index: usize) -> Constraint {
        let (ne, ng) = (self.num_edges(), self.num_groups());
        if index < ne {
            Constraint::Edge(index)
        } else if index < ne + ng {
            Constraint::Source(index - ne)
        } else {
            Constraint::NonNeg(index - ne - ng)
        }
    }

    /// Left-hand side of an edge constraint: sum over groups of the max
    /// (exact) or θ-norm (relaxed) of member rates.
    pub fn edge_load(&self, lambda: &[f64], edge: usize, theta: Option<f64>) -> f64 {
        self.edge_groups[edge]
            .iter()
            .map(|eg| combine(eg.paths.iter().map(|&p| lambda[p]), theta))
            .sum()
    }

    pub fn source_load(&self, lambda: &[f64], group: usize, theta: Option<f64>) -> f64 {
        combine(self.paths.groups[group].paths.iter().map(|&p| lambda[p]), theta)
    }

    /// Per-constraint violations `max(0, lhs - rhs)` ordered edges, source
    /// groups, then nonnegativity. `theta = None` is the exact max form.
    pub fn residuals(&self, lambda: &[f64], theta: Option<f64>) -> Vec<f64> {
        assert_eq!(lambda.len(), self.num_paths(), "rate vector has the wrong length");
        let mut out = Vec::with_capacity(self.num_constraints());
        for e in 0..self.num_edges() {
            out.push((self.edge_load(lambda, e, theta) - self.capacity[e]).max(0.0));
        }
        for g in 0..self.num_groups() {
            out.push((self.source_load(lambda, g, theta) - self.group_rate(g)).max(0.0));
        }
        out.extend(lambda.iter().map(|&x| (-x).max(0.0)));
        out
    }

    /// Mean exact violation per constraint.
    pub fn infeasibility(&self, lambda: &[f64]) -> f64 {
        let r = self.residuals(lambda, None);
        if r.is_empty() {
            0.0
        } else {
            r.iter().sum::<f64>() / r.len() as f64
        }
    }

    pub fn is_feasible(&self, lambda: &[f64], tol: f64) -> bool {
        self.residuals(lambda, None).iter().all(|&r| r <= tol)
    }

    /// Largest `c <= 1` with `c * lambda` feasible (after clipping negatives).
    /// Every constraint is positively homogeneous, so this is exact.
    pub fn feasible_scale(&self, lambda: &[f64]) -> f64 {
        let clipped: Vec<f64> = lambda.iter().map(|&x| x.max(0.0)).collect();
        let mut c: f64 = 1.0;
        for e in 0..self.num_edges() {
            let load = self.edge_load(&clipped, e, None);
            if load > self.capacity[e] {
                c = c.min(self.capacity[e] / load);
            }
        }
        for g in 0..self.num_groups() {
            let load = self.source_load(&clipped, g, None);
            if load > self.group_rate(g) {
                c = c.min(self.group_rate(g) / load);
            }
        }
        c
    }
}

/// Max (θ = None) or θ-norm of nonnegative parts, computed without overflow.
pub fn combine(values: impl Iterator<Item = f64>, theta: Option<f64>) -> f64 {
    let vals: Vec<f64> = values.map(|x| x.max(0.0)).collect();
    let max = vals.iter().copied().fold(0.0, f64::max);
    match theta {
        None => max,
        Some(t) => {
            if max == 0.0 {
                return 0.0;
            }
            let s: f64 = vals.iter().map(|&x| (x / max).powf(t)).sum();
            max * s.powf(1.0 / t)
        }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::topology::{load_edge_list, route, Placement};

    /// One edge 0 -> 1 with capacity `cap`, one source and `learners`
    /// learners all reached through that edge.
    pub(crate) fn shared_edge(cap: f64, rate: f64, types: &[usize]) -> Instance {
        let nl = types.len();
        let mut text = format!("0 1 {cap}\n");
        for i in 0..nl {
            text.push_str(&format!("1 {} 100\n", i + 2));
        }
        let g = load_edge_list(&text).unwrap();
        let nt = types.iter().max().unwrap() + 1;
        let pl = Placement::new(vec![0], (2..2 + nl).collect(), types.to_vec(), nt).unwrap();
        let ps = route(&g, &pl).unwrap();
        let d = 1;
        let cfg = ProblemConfig {
            d,
            horizon: 1.0,
            rates: vec![vec![rate; nt]],
            source_var: vec![vec![1.0; d]],
            noise_var: vec![vec![1.0; nt]],
            prior_mean: vec![vec![0.0; d]; nl],
            prior_var: vec![vec![1.0; d]; nl],
        };
        Instance::new(g, pl, ps, cfg).unwrap()
    }

    pub(crate) fn single(cap: f64, rate: f64) -> Instance {
        let g = load_edge_list(&format!("0 1 {cap}\n")).unwrap();
        let pl = Placement::new(vec![0], vec![1], vec![0], 1).unwrap();
        let ps = route(&g, &pl).unwrap();
        let cfg = ProblemConfig {
            d: 1,
            horizon: 1.0,
            rates: vec![vec![rate]],
            source_var: vec![vec![1.0]],
            noise_var: vec![vec![1.0]],
            prior_mean: vec![vec![0.0]],
            prior_var: vec![vec![1.0]],
        };
        Instance::new(g, pl, ps, cfg).unwrap()
    }

    #[test]
    fn toy_has_one_path() {
        let inst = single(5.0, 3.0);
        assert_eq!(inst.num_paths(), 1);
        assert_eq!(inst.num_constraints(), 3);
    }

    #[test]
    fn absent_edge_rejected() {
        let inst = single(5.0, 3.0);
        let mut ps = inst.paths.clone();
        ps.paths[0].edges[0] = 7;
        let err = Instance::new(inst.graph.clone(), inst.placement.clone(), ps, inst.config.clone());
        assert!(matches!(err, Err(Error::Instance(_))));
    }

    #[test]
    fn zero_rates_feasible() {
        let inst = shared_edge(5.0, 8.0, &[0, 0]);
        assert!(inst.residuals(&[0.0, 0.0], None).iter().all(|&r| r == 0.0));
        assert_eq!(inst.infeasibility(&[0.0, 0.0]), 0.0);
    }

    #[test]
    fn multicast_uses_max() {
        let inst = shared_edge(5.0, 8.0, &[0, 0]);
        let lam = [3.0, 4.0];
        let e = inst.graph.edge_index(0, 1).unwrap();
        assert_eq!(inst.edge_load(&lam, e, None), 4.0);
        assert_eq!(inst.residuals(&lam, None)[e], 0.0);
        let relaxed = inst.edge_load(&lam, e, Some(10.0));
        let direct = (3f64.powi(10) + 4f64.powi(10)).powf(0.1);
        assert!((relaxed - direct).abs() < 1e-12);
        assert!((relaxed - 4.021974).abs() < 1e-6);
        let tight = shared_edge(4.0, 8.0, &[0, 0]);
        let r = tight.residuals(&lam, Some(10.0))[e];
        assert!((r - (direct - 4.0)).abs() < 1e-12);
    }

    #[test]
    fn distinct_groups_add_up() {
        let inst = shared_edge(5.0, 8.0, &[0, 1]);
        let e = inst.graph.edge_index(0, 1).unwrap();
        assert_eq!(inst.edge_load(&[3.0, 4.0], e, None), 7.0);
    }

    #[test]
    fn doubled_tight_point() {
        let mu = 2.0;
        let inst = single(mu, mu);
        let v = inst.infeasibility(&[2.0 * mu]);
        assert!((v - (mu + mu) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn theta_norm_decreases_toward_max() {
        let inst = shared_edge(1.0, 8.0, &[0, 0, 0]);
        let lam = [1.0, 2.0, 1.5];
        let e = inst.graph.edge_index(0, 1).unwrap();
        let r1 = inst.edge_load(&lam, e, Some(1.0));
        let r10 = inst.edge_load(&lam, e, Some(10.0));
        let r100 = inst.edge_load(&lam, e, Some(100.0));
        let exact = inst.edge_load(&lam, e, None);
        assert!(r1 > r10 && r10 > r100 && r100 >= exact);
        assert!((r100 - exact) / exact < 0.01);
    }

    #[test]
    fn scale_restores_feasibility() {
        let inst = shared_edge(5.0, 8.0, &[0, 1]);
        let lam = [6.0, 4.0];
        let c = inst.feasible_scale(&lam);
        let scaled: Vec<f64> = lam.iter().map(|x| x * c).collect();
        assert!(inst.is_feasible(&scaled, 1e-12));
        assert!((c - 0.5).abs() < 1e-12);
    }
}
