//! Network graphs, source/learner placement and multicast path sets.
//!
//! Undirected generators (ER, trees, hypercubes, stars, grids) emit every
//! link as two antiparallel directed edges. Paths are hop-count shortest
//! paths; among equal-length candidates the lexicographically smallest
//! node sequence wins.

use std::collections::{HashMap, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub type NodeId = usize;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub src: NodeId,
    pub dst: NodeId,
    /// `None` when an edge list omitted it; the instance builder samples one.
    pub capacity: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    labels: Vec<String>,
    edges: Vec<Edge>,
    lookup: HashMap<(NodeId, NodeId), usize>,
    out_adj: Vec<Vec<(NodeId, usize)>>,
    in_adj: Vec<Vec<(NodeId, usize)>>,
}

impl Graph {
    /// Empty graph on `n` nodes labelled `0..n`.
    pub fn with_nodes(n: usize) -> Self {
        Self::with_labels((0..n).map(|i| i.to_string()).collect())
    }

    pub fn with_labels(labels: Vec<String>) -> Self {
        let n = labels.len();
        Graph {
            labels,
            edges: Vec::new(),
            lookup: HashMap::new(),
            out_adj: vec![Vec::new(); n],
            in_adj: vec![Vec::new(); n],
        }
    }

    pub fn add_edge(&mut self, src: NodeId, dst: NodeId, capacity: Option<f64>) -> Result<usize> {
        let n = self.num_nodes();
        if src >= n || dst >= n {
            return Err(Error::InvalidTopology(format!("edge ({src}, {dst}) references a missing node")));
        }
        if src == dst {
            return Err(Error::InvalidTopology(format!("self-loop at node {}", self.labels[src])));
        }
        if let Some(c) = capacity {
            if !(c >= 0.0) || !c.is_finite() {
                return Err(Error::InvalidTopology(format!("capacity {c} on ({src}, {dst}) must be finite and >= 0")));
            }
        }
        if self.lookup.contains_key(&(src, dst)) {
            return Err(Error::InvalidTopology(format!(
                "duplicate edge ({}, {})",
                self.labels[src], self.labels[dst]
            )));
        }
        let idx = self.edges.len();
        self.edges.push(Edge { src, dst, capacity });
        self.lookup.insert((src, dst), idx);
        self.out_adj[src].push((dst, idx));
        self.in_adj[dst].push((src, idx));
        Ok(idx)
    }

    /// Adds both `(u, v)` and `(v, u)`.
    fn add_link<R: Rng>(&mut self, u: NodeId, v: NodeId, caps: Option<(f64, f64)>, rng: &mut R) -> Result<()> {
        let c1 = caps.map(|r| rng::uniform(rng, r));
        let c2 = caps.map(|r| rng::uniform(rng, r));
        self.add_edge(u, v, c1)?;
        self.add_edge(v, u, c2)?;
        Ok(())
    }

    pub fn num_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, idx: usize) -> &Edge {
        &self.edges[idx]
    }

    pub fn label(&self, node: NodeId) -> &str {
        &self.labels[node]
    }

    pub fn edge_index(&self, src: NodeId, dst: NodeId) -> Option<usize> {
        self.lookup.get(&(src, dst)).copied()
    }

    /// Outgoing `(neighbor, edge index)` pairs.
    pub fn out_edges(&self, node: NodeId) -> &[(NodeId, usize)] {
        &self.out_adj[node]
    }

    pub fn in_edges(&self, node: NodeId) -> &[(NodeId, usize)] {
        &self.in_adj[node]
    }

    /// Fills missing capacities with draws from `range`.
    pub fn fill_capacities<R: Rng>(&mut self, range: (f64, f64), rng: &mut R) {
        for e in &mut self.edges {
            if e.capacity.is_none() {
                e.capacity = Some(rng::uniform(rng, range));
            }
        }
    }

    /// True when every node reaches every other node along directed edges.
    pub fn is_strongly_connected(&self) -> bool {
        let n = self.num_nodes();
        if n <= 1 {
            return true;
        }
        let reach = |adj: &Vec<Vec<(NodeId, usize)>>| {
            let mut seen = vec![false; n];
            let mut queue = VecDeque::from([0usize]);
            seen[0] = true;
            let mut count = 1;
            while let Some(u) = queue.pop_front() {
                for &(v, _) in &adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        count += 1;
                        queue.push_back(v);
                    }
                }
            }
            count == n
        };
        reach(&self.out_adj) && reach(&self.in_adj)
    }

    /// Renders the graph in the edge-list text format.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for e in &self.edges {
            match e.capacity {
                Some(c) => out.push_str(&format!("{} {} {}\n", self.labels[e.src], self.labels[e.dst], c)),
                None => out.push_str(&format!("{} {}\n", self.labels[e.src], self.labels[e.dst])),
            }
        }
        out
    }
}

/// Parses the `u v [capacity]` edge-list format.
///
/// Node labels are arbitrary tokens. They are numbered in numeric order when
/// every label is an integer and in string order otherwise, so node-id
/// tie-breaking in routing follows the labels.
pub fn load_edge_list(text: &str) -> Result<Graph> {
    let mut raw: Vec<(usize, String, String, Option<f64>)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = content.split_whitespace().collect();
        let cap = match tokens.len() {
            2 => None,
            3 => {
                let c: f64 = tokens[2].parse().map_err(|_| Error::EdgeList {
                    line: lineno,
                    reason: format!("capacity `{}` is not a number", tokens[2]),
                })?;
                if !c.is_finite() || c < 0.0 {
                    return Err(Error::EdgeList { line: lineno, reason: format!("negative or non-finite capacity {c}") });
                }
                Some(c)
            }
            k => {
                return Err(Error::EdgeList { line: lineno, reason: format!("expected `u v [capacity]`, found {k} fields") })
            }
        };
        if tokens[0] == tokens[1] {
            return Err(Error::EdgeList { line: lineno, reason: format!("self-loop at `{}`", tokens[0]) });
        }
        raw.push((lineno, tokens[0].to_string(), tokens[1].to_string(), cap));
    }

    let mut labels: Vec<String> = raw.iter().flat_map(|(_, u, v, _)| [u.clone(), v.clone()]).collect();
    labels.sort();
    labels.dedup();
    if labels.iter().all(|l| l.parse::<u64>().is_ok()) {
        labels.sort_by_key(|l| l.parse::<u64>().unwrap_or(0));
    }
    let index: HashMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();

    let mut g = Graph::with_labels(labels.clone());
    for (lineno, u, v, cap) in &raw {
        g.add_edge(index[u.as_str()], index[v.as_str()], *cap)
            .map_err(|e| Error::EdgeList { line: *lineno, reason: e.to_string() })?;
    }
    Ok(g)
}

const GEANT: &str = include_str!("../data/geant.edges");
const ABILENE: &str = include_str!("../data/abilene.edges");

/// Graph generators and sources.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Topology {
    /// Erdős–Rényi G(n, p), resampled until connected.
    #[serde(rename = "er")]
    ErdosRenyi { nodes: usize, p: f64 },
    #[serde(rename = "bt")]
    BalancedTree { branching: usize, depth: usize },
    #[serde(rename = "hc")]
    Hypercube { dim: usize },
    #[serde(rename = "star")]
    Star { nodes: usize },
    #[serde(rename = "grid")]
    Grid { rows: usize, cols: usize },
    /// Kleinberg lattice on a `side x side` grid with `long_links` directed
    /// long-range contacts per node drawn with probability ∝ dist^-exponent.
    #[serde(rename = "sw")]
    SmallWorld { side: usize, long_links: usize, exponent: f64 },
    #[serde(rename = "file")]
    File { path: String },
    /// Bundled backbone edge lists: `geant`, `abilene`.
    #[serde(rename = "builtin")]
    Builtin { name: String },
}

impl Topology {
    /// Builds a topology from a kind name and a rough node count, using the
    /// same parameter families as the evaluation table.
    pub fn from_kind(kind: &str, nodes: Option<usize>) -> Result<Topology> {
        let n = nodes.unwrap_or(100);
        let t = match kind {
            "er" => Topology::ErdosRenyi { nodes: n, p: 0.1 },
            "bt" => {
                // Smallest depth of a 4-ary tree reaching `n` nodes.
                let mut depth = 0;
                while (4usize.pow(depth as u32 + 1) - 1) / 3 < n {
                    depth += 1;
                }
                Topology::BalancedTree { branching: 4, depth }
            }
            "hc" => Topology::Hypercube { dim: (n.max(2) as f64).log2().round() as usize },
            "star" => Topology::Star { nodes: n },
            "grid" | "sw" => {
                let side = (n as f64).sqrt().round().max(1.0) as usize;
                if kind == "grid" {
                    Topology::Grid { rows: side, cols: side }
                } else {
                    Topology::SmallWorld { side, long_links: 1, exponent: 2.0 }
                }
            }
            "geant" | "abilene" => Topology::Builtin { name: kind.to_string() },
            other => return Err(Error::UnknownTopology(other.to_string())),
        };
        Ok(t)
    }

    pub fn name(&self) -> &str {
        match self {
            Topology::ErdosRenyi { .. } => "er",
            Topology::BalancedTree { .. } => "bt",
            Topology::Hypercube { .. } => "hc",
            Topology::Star { .. } => "star",
            Topology::Grid { .. } => "grid",
            Topology::SmallWorld { .. } => "sw",
            Topology::File { .. } => "file",
            Topology::Builtin { name } => name,
        }
    }
}

/// Generates (or loads) a graph. Capacities are drawn u.a.r. from `caps`
/// when given; loaded files keep their own capacities and only missing ones
/// are drawn.
pub fn generate(topology: &Topology, caps: Option<(f64, f64)>, seed: u64) -> Result<Graph> {
    let mut rng = rng::stream(seed, &[0x7070]);
    let degenerate = |what: &str| Err(Error::InvalidTopology(what.to_string()));
    let g = match topology {
        Topology::ErdosRenyi { nodes, p } => {
            if *nodes == 0 {
                return degenerate("ER graph needs at least one node");
            }
            if !(0.0..=1.0).contains(p) {
                return degenerate("ER edge probability must lie in [0, 1]");
            }
            let mut attempt = 0u64;
            loop {
                let mut rng = rng::stream(seed, &[0x7070, attempt]);
                let mut g = Graph::with_nodes(*nodes);
                for u in 0..*nodes {
                    for v in (u + 1)..*nodes {
                        if rng.random::<f64>() < *p {
                            g.add_link(u, v, caps, &mut rng)?;
                        }
                    }
                }
                if g.is_strongly_connected() {
                    break g;
                }
                attempt += 1;
                if attempt >= 1000 {
                    return degenerate("could not draw a connected ER graph; increase p");
                }
            }
        }
        Topology::BalancedTree { branching, depth } => {
            if *branching == 0 {
                return degenerate("tree branching factor must be >= 1");
            }
            let mut count = 1usize;
            let mut level = 1usize;
            for _ in 0..*depth {
                level *= branching;
                count += level;
            }
            let mut g = Graph::with_nodes(count);
            for child in 1..count {
                g.add_link((child - 1) / branching, child, caps, &mut rng)?;
            }
            g
        }
        Topology::Hypercube { dim } => {
            let n = 1usize << dim;
            let mut g = Graph::with_nodes(n);
            for u in 0..n {
                for b in 0..*dim {
                    let v = u ^ (1 << b);
                    if u < v {
                        g.add_link(u, v, caps, &mut rng)?;
                    }
                }
            }
            g
        }
        Topology::Star { nodes } => {
            if *nodes == 0 {
                return degenerate("star needs at least one node");
            }
            let mut g = Graph::with_nodes(*nodes);
            for leaf in 1..*nodes {
                g.add_link(0, leaf, caps, &mut rng)?;
            }
            g
        }
        Topology::Grid { rows, cols } => {
            if rows * cols == 0 {
                return degenerate("grid needs at least one row and column");
            }
            grid(*rows, *cols, caps, &mut rng)?
        }
        Topology::SmallWorld { side, long_links, exponent } => {
            if *side == 0 {
                return degenerate("small-world lattice side must be >= 1");
            }
            let mut g = grid(*side, *side, caps, &mut rng)?;
            let n = side * side;
            let coord = |u: usize| ((u / side) as i64, (u % side) as i64);
            for u in 0..n {
                let (ux, uy) = coord(u);
                let weights: Vec<f64> = (0..n)
                    .map(|v| {
                        let (vx, vy) = coord(v);
                        let dist = ((ux - vx).abs() + (uy - vy).abs()) as f64;
                        if v == u { 0.0 } else { dist.powf(-exponent) }
                    })
                    .collect();
                let total: f64 = weights.iter().sum();
                if total <= 0.0 {
                    continue;
                }
                let mut added = 0;
                let mut tries = 0;
                while added < *long_links && tries < 100 * long_links.max(&1) {
                    tries += 1;
                    let mut target = rng.random::<f64>() * total;
                    let mut pick = n - 1;
                    for (v, w) in weights.iter().enumerate() {
                        if target < *w {
                            pick = v;
                            break;
                        }
                        target -= w;
                    }
                    if pick == u || g.edge_index(u, pick).is_some() {
                        continue;
                    }
                    let c = caps.map(|r| rng::uniform(&mut rng, r));
                    g.add_edge(u, pick, c)?;
                    added += 1;
                }
            }
            g
        }
        Topology::File { .. } | Topology::Builtin { .. } => {
            let mut g = match topology {
                Topology::File { path } => load_edge_list(&std::fs::read_to_string(path)?)?,
                Topology::Builtin { name } => match name.as_str() {
                    "geant" => load_edge_list(GEANT)?,
                    "abilene" => load_edge_list(ABILENE)?,
                    other => return Err(Error::UnknownTopology(other.to_string())),
                },
                _ => unreachable!(),
            };
            if let Some(range) = caps {
                g.fill_capacities(range, &mut rng);
            }
            g
        }
    };
    Ok(g)
}

fn grid<R: Rng>(rows: usize, cols: usize, caps: Option<(f64, f64)>, rng: &mut R) -> Result<Graph> {
    let mut g = Graph::with_nodes(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let u = r * cols + c;
            if c + 1 < cols {
                g.add_link(u, u + 1, caps, rng)?;
            }
            if r + 1 < rows {
                g.add_link(u, u + cols, caps, rng)?;
            }
        }
    }
    Ok(g)
}

/// Which nodes act as sources and learners, and each learner's type.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub sources: Vec<NodeId>,
    pub learners: Vec<NodeId>,
    /// `learner_type[i]` is the type wanted by `learners[i]`.
    pub learner_type: Vec<usize>,
    pub num_types: usize,
}

impl Placement {
    pub fn new(sources: Vec<NodeId>, learners: Vec<NodeId>, learner_type: Vec<usize>, num_types: usize) -> Result<Self> {
        if learners.len() != learner_type.len() {
            return Err(Error::Placement("every learner needs exactly one type".into()));
        }
        if let Some(t) = learner_type.iter().find(|&&t| t >= num_types) {
            return Err(Error::Placement(format!("learner type {t} outside 0..{num_types}")));
        }
        let mut s = sources.clone();
        s.sort_unstable();
        s.dedup();
        let mut l = learners.clone();
        l.sort_unstable();
        l.dedup();
        if s.len() != sources.len() || l.len() != learners.len() {
            return Err(Error::Placement("duplicate source or learner node".into()));
        }
        Ok(Placement { sources, learners, learner_type, num_types })
    }

    pub fn num_sources(&self) -> usize {
        self.sources.len()
    }

    pub fn num_learners(&self) -> usize {
        self.learners.len()
    }
}

/// One multicast branch: the route from a source to one learner of a type.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Path {
    /// Index into `Placement::sources`.
    pub source: usize,
    pub ty: usize,
    /// Index into `Placement::learners`.
    pub learner: usize,
    pub nodes: Vec<NodeId>,
    pub edges: Vec<usize>,
}

/// All paths sharing a `(source, type)` pair; they may be multicast together.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathGroup {
    pub source: usize,
    pub ty: usize,
    pub paths: Vec<usize>,
}

/// Paths ordered by source, then type, then learner. The position of a path
/// in `paths` is its coordinate in a rate allocation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathSet {
    pub paths: Vec<Path>,
    pub groups: Vec<PathGroup>,
}

impl PathSet {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// Group index for `(source, ty)`.
    pub fn group_of(&self, source: usize, ty: usize, num_types: usize) -> usize {
        source * num_types + ty
    }
}

/// Draws sources and learners u.a.r. without replacement, assigns learner
/// types round-robin then shuffles them, and routes every pair.
pub fn place_and_route(
    graph: &Graph,
    num_sources: usize,
    num_learners: usize,
    num_types: usize,
    seed: u64,
) -> Result<(Placement, PathSet)> {
    let placement = place(graph, num_sources, num_learners, num_types, seed)?;
    let paths = route(graph, &placement)?;
    Ok((placement, paths))
}

pub fn place(graph: &Graph, num_sources: usize, num_learners: usize, num_types: usize, seed: u64) -> Result<Placement> {
    if num_sources == 0 || num_learners == 0 || num_types == 0 {
        return Err(Error::Placement("need at least one source, learner and type".into()));
    }
    if num_sources + num_learners > graph.num_nodes() {
        return Err(Error::Placement(format!(
            "{num_sources} sources + {num_learners} learners exceed {} nodes",
            graph.num_nodes()
        )));
    }
    let mut rng = rng::stream(seed, &[0x91ace]);
    let mut nodes: Vec<NodeId> = (0..graph.num_nodes()).collect();
    nodes.shuffle(&mut rng);
    let mut sources = nodes[..num_sources].to_vec();
    let mut learners = nodes[num_sources..num_sources + num_learners].to_vec();
    sources.sort_unstable();
    learners.sort_unstable();
    let mut types: Vec<usize> = (0..num_learners).map(|i| i % num_types).collect();
    types.shuffle(&mut rng);
    Placement::new(sources, learners, types, num_types)
}

/// Hop distance from every node to `target` (usize::MAX when unreachable).
fn distances_to(graph: &Graph, target: NodeId) -> Vec<usize> {
    let mut dist = vec![usize::MAX; graph.num_nodes()];
    dist[target] = 0;
    let mut queue = VecDeque::from([target]);
    while let Some(v) = queue.pop_front() {
        for &(u, _) in graph.in_edges(v) {
            if dist[u] == usize::MAX {
                dist[u] = dist[v] + 1;
                queue.push_back(u);
            }
        }
    }
    dist
}

/// Routes one shortest path from every source to every learner.
pub fn route(graph: &Graph, placement: &Placement) -> Result<PathSet> {
    let dists: Vec<Vec<usize>> = placement.learners.iter().map(|&l| distances_to(graph, l)).collect();
    let mut paths = Vec::new();
    let mut groups = Vec::new();
    for (si, &s) in placement.sources.iter().enumerate() {
        for ty in 0..placement.num_types {
            let mut members = Vec::new();
            for (li, &l) in placement.learners.iter().enumerate() {
                if placement.learner_type[li] != ty {
                    continue;
                }
                let dist = &dists[li];
                if dist[s] == usize::MAX {
                    return Err(Error::Unreachable { source_node: s, learner: l });
                }
                let mut nodes = vec![s];
                let mut edges = Vec::new();
                let mut u = s;
                while u != l {
                    let (next, eidx) = graph
                        .out_edges(u)
                        .iter()
                        .filter(|(v, _)| dist[*v] != usize::MAX && dist[*v] + 1 == dist[u])
                        .min_by_key(|(v, _)| *v)
                        .copied()
                        .expect("a BFS predecessor exists on a finite distance");
                    nodes.push(next);
                    edges.push(eidx);
                    u = next;
                }
                members.push(paths.len());
                paths.push(Path { source: si, ty, learner: li, nodes, edges });
            }
            groups.push(PathGroup { source: si, ty, paths: members });
        }
    }
    Ok(PathSet { paths, groups })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> Graph {
        load_edge_list("0 1 1\n1 2 1\n").unwrap()
    }

    #[test]
    fn table_edge_counts() {
        let bt = generate(&Topology::BalancedTree { branching: 4, depth: 4 }, Some((5.0, 10.0)), 3).unwrap();
        assert_eq!((bt.num_nodes(), bt.num_edges()), (341, 680));
        let star = generate(&Topology::Star { nodes: 100 }, None, 0).unwrap();
        assert_eq!((star.num_nodes(), star.num_edges()), (100, 198));
        let hc = generate(&Topology::Hypercube { dim: 7 }, None, 0).unwrap();
        assert_eq!((hc.num_nodes(), hc.num_edges()), (128, 896));
        let grid = generate(&Topology::Grid { rows: 10, cols: 10 }, None, 0).unwrap();
        assert_eq!((grid.num_nodes(), grid.num_edges()), (100, 360));
    }

    #[test]
    fn smallest_star() {
        let g = generate(&Topology::Star { nodes: 2 }, None, 0).unwrap();
        assert_eq!(g.num_edges(), 2);
        assert!(g.edge_index(0, 1).is_some() && g.edge_index(1, 0).is_some());
    }

    #[test]
    fn degenerate_params_rejected() {
        assert!(generate(&Topology::Star { nodes: 0 }, None, 0).is_err());
        assert!(generate(&Topology::ErdosRenyi { nodes: 0, p: 0.5 }, None, 0).is_err());
        assert!(matches!(Topology::from_kind("torus", None), Err(Error::UnknownTopology(_))));
    }

    #[test]
    fn capacities_in_range() {
        let g = generate(&Topology::ErdosRenyi { nodes: 30, p: 0.2 }, Some((5.0, 10.0)), 11).unwrap();
        assert!(g.edges().iter().all(|e| (5.0..=10.0).contains(&e.capacity.unwrap())));
        assert!(g.is_strongly_connected());
    }

    #[test]
    fn edge_list_basics() {
        let g = load_edge_list("# two nodes\n0 1 5.0\n1 0 5.0 # back\n").unwrap();
        assert_eq!((g.num_nodes(), g.num_edges()), (2, 2));
        assert_eq!(g.edge(0).capacity, Some(5.0));
        let g = load_edge_list("a b\n").unwrap();
        assert_eq!(g.edge(0).capacity, None);
    }

    #[test]
    fn edge_list_errors_carry_line_numbers() {
        match load_edge_list("0 1 1\n0 0 1.0\n") {
            Err(Error::EdgeList { line: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(load_edge_list("0 1 -2"), Err(Error::EdgeList { line: 1, .. })));
        assert!(matches!(load_edge_list("0 1 x"), Err(Error::EdgeList { line: 1, .. })));
        assert!(matches!(load_edge_list("0\n"), Err(Error::EdgeList { line: 1, .. })));
        assert!(matches!(load_edge_list("0 1\n0 1\n"), Err(Error::EdgeList { line: 2, .. })));
    }

    #[test]
    fn numeric_labels_sort_numerically() {
        let g = load_edge_list("10 2\n2 10\n").unwrap();
        assert_eq!(g.label(0), "2");
        assert_eq!(g.label(1), "10");
    }

    #[test]
    fn bundled_backbones() {
        let geant = generate(&Topology::Builtin { name: "geant".into() }, None, 0).unwrap();
        assert_eq!((geant.num_nodes(), geant.num_edges()), (22, 66));
        let abilene = generate(&Topology::Builtin { name: "abilene".into() }, None, 0).unwrap();
        assert_eq!((abilene.num_nodes(), abilene.num_edges()), (9, 26));
        assert!(geant.is_strongly_connected() && abilene.is_strongly_connected());
    }

    #[test]
    fn line_graph_route() {
        let g = line();
        let p = Placement::new(vec![0], vec![2], vec![0], 1).unwrap();
        let ps = route(&g, &p).unwrap();
        assert_eq!(ps.paths.len(), 1);
        assert_eq!(ps.paths[0].nodes, vec![0, 1, 2]);
        assert_eq!(ps.paths[0].edges, vec![0, 1]);
    }

    #[test]
    fn unreachable_learner() {
        let mut g = Graph::with_nodes(2);
        g.add_edge(1, 0, Some(1.0)).unwrap();
        let p = Placement::new(vec![0], vec![1], vec![0], 1).unwrap();
        assert!(matches!(route(&g, &p), Err(Error::Unreachable { .. })));
        let g = Graph::with_nodes(2);
        assert!(matches!(route(&g, &p), Err(Error::Unreachable { .. })));
    }

    #[test]
    fn ties_break_lexicographically() {
        // 0 -> {2, 1} -> 3: both two hops, the route must pass through node 1.
        let g = load_edge_list("0 2\n0 1\n2 3\n1 3\n").unwrap();
        let p = Placement::new(vec![0], vec![3], vec![0], 1).unwrap();
        assert_eq!(route(&g, &p).unwrap().paths[0].nodes, vec![0, 1, 3]);
    }

    #[test]
    fn placement_counts_and_types() {
        let g = generate(&Topology::Builtin { name: "geant".into() }, None, 0).unwrap();
        let (pl, ps) = place_and_route(&g, 3, 3, 2, 5).unwrap();
        assert_eq!(pl.sources.len(), 3);
        assert_eq!(pl.learners.len(), 3);
        assert!(pl.sources.iter().all(|s| !pl.learners.contains(s)));
        for t in 0..2 {
            assert!(pl.learner_type.contains(&t));
        }
        // One path per (source, learner).
        assert_eq!(ps.len(), 9);
        for grp in &ps.groups {
            let want = pl.learner_type.iter().filter(|&&t| t == grp.ty).count();
            assert_eq!(grp.paths.len(), want);
        }
        assert!(place_and_route(&g, 20, 3, 2, 5).is_err());
    }
}
