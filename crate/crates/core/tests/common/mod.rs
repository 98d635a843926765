#![allow(dead_code)]

use expnet::topology::{load_edge_list, route, Placement};
use expnet::{Instance, ProblemConfig};

/// Instance from an edge list and explicit placement. Statistics are filled
/// uniformly: every source rate `rate`, unit source/prior variances, unit
/// noise, zero prior means.
pub fn build(edges: &str, sources: Vec<usize>, learners: Vec<usize>, types: Vec<usize>, d: usize, rate: f64) -> Instance {
    let g = load_edge_list(edges).unwrap();
    let nt = types.iter().max().map_or(1, |m| m + 1);
    let (ns, nl) = (sources.len(), learners.len());
    let pl = Placement::new(sources, learners, types, nt).unwrap();
    let ps = route(&g, &pl).unwrap();
    let cfg = ProblemConfig {
        d,
        horizon: 1.0,
        rates: vec![vec![rate; nt]; ns],
        source_var: vec![vec![1.0; d]; ns],
        noise_var: vec![vec![1.0; nt]; ns],
        prior_mean: vec![vec![0.0; d]; nl],
        prior_var: vec![vec![1.0; d]; nl],
    };
    Instance::new(g, pl, ps, cfg).unwrap()
}

/// One source feeding one learner over a single uncongested link, d = 1.
pub fn scalar(rate: f64, prior_var: f64, source_var: f64, noise_var: f64) -> Instance {
    let mut inst = build("0 1 1000\n", vec![0], vec![1], vec![0], 1, rate);
    inst.config.prior_var = vec![vec![prior_var]];
    inst.config.source_var = vec![vec![source_var]];
    inst.config.noise_var = vec![vec![noise_var]];
    inst
}
