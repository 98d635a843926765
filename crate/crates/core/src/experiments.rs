//! Instance construction for the evaluation settings, experiment sweeps and
//! CSV results.

use std::collections::HashSet;
use std::fs::OpenOptions;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::central::{fw_solve, maxfair_solve, maxtp_solve, pga_solve, pga_step};
use crate::distributed::{dfw_solve, dmax_solve, dpga_solve, Baseline, PdConfig, RoundRow};
use crate::error::{Error, Result};
use crate::gradient::EstimatorParams;
use crate::instance::{Instance, ProblemConfig};
use crate::objective::{estimation_error, utility_mc};
use crate::rng::{self, uniform};
use crate::topology::{generate, place_and_route, Topology};

const KEY_STATS: u64 = 0x57A7;
const KEY_SOLVER: u64 = 0x501E;
const KEY_EVAL: u64 = 0xE7A1;

/// Distributions of the statistical parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StatsConfig {
    pub d: usize,
    pub horizon: f64,
    pub rate_range: (f64, f64),
    /// Label noise variance σ²_{s,t}.
    pub noise_range: (f64, f64),
    pub well_known_var: (f64, f64),
    pub poorly_known_var: (f64, f64),
    pub interested_var: (f64, f64),
    pub indifferent_var: (f64, f64),
    pub interested_mean: f64,
    pub indifferent_mean: f64,
    /// Probability that a feature is well-known (per source) or interesting
    /// (per learner).
    pub class_prob: f64,
}

impl Default for StatsConfig {
    fn default() -> Self {
        StatsConfig {
            d: 100,
            horizon: 1.0,
            rate_range: (5.0, 8.0),
            noise_range: (0.5, 1.0),
            well_known_var: (0.0, 0.01),
            poorly_known_var: (10.0, 20.0),
            interested_var: (0.0, 0.01),
            indifferent_var: (1.0, 2.0),
            interested_mean: 1.0,
            indifferent_mean: 0.0,
            class_prob: 0.5,
        }
    }
}

/// Everything needed to build one instance from a seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub topology: Topology,
    pub cap_range: (f64, f64),
    pub num_sources: usize,
    pub num_learners: usize,
    pub num_types: usize,
    #[serde(default)]
    pub stats: StatsConfig,
}

pub const ROWS: [&str; 8] = ["er", "bt", "hc", "star", "grid", "sw", "geant", "abilene"];

impl InstanceSpec {
    /// Full-size evaluation row.
    pub fn sec6(row: &str) -> Result<Self> {
        let topology = match row {
            // 1042 directed edges on 100 nodes: p = 521 / 4950.
            "er" => Topology::ErdosRenyi { nodes: 100, p: 0.105 },
            "bt" => Topology::BalancedTree { branching: 4, depth: 4 },
            "hc" => Topology::Hypercube { dim: 7 },
            "star" => Topology::Star { nodes: 100 },
            "grid" => Topology::Grid { rows: 10, cols: 10 },
            "sw" => Topology::SmallWorld { side: 10, long_links: 1, exponent: 2.0 },
            "geant" | "abilene" => Topology::Builtin { name: row.into() },
            other => return Err(Error::UnknownTopology(other.into())),
        };
        let backbone = matches!(row, "geant" | "abilene");
        Ok(InstanceSpec {
            topology,
            cap_range: if backbone { (5.0, 8.0) } else { (5.0, 10.0) },
            num_sources: if backbone { 3 } else { 10 },
            num_learners: if backbone { 3 } else { 5 },
            num_types: if backbone { 2 } else { 3 },
            stats: StatsConfig::default(),
        })
    }

    /// Desk-scale row: d = 10 and at most 30 nodes.
    pub fn desk(row: &str) -> Result<Self> {
        let mut spec = InstanceSpec::sec6(row)?;
        spec.stats.d = 10;
        spec.topology = match row {
            "er" => Topology::ErdosRenyi { nodes: 30, p: 0.2 },
            "bt" => Topology::BalancedTree { branching: 4, depth: 2 },
            "hc" => Topology::Hypercube { dim: 4 },
            "star" => Topology::Star { nodes: 30 },
            "grid" => Topology::Grid { rows: 5, cols: 6 },
            "sw" => Topology::SmallWorld { side: 5, long_links: 1, exponent: 2.0 },
            _ => spec.topology,
        };
        if !matches!(row, "geant" | "abilene") {
            spec.num_sources = 5;
            spec.num_learners = 4;
        }
        Ok(spec)
    }

    pub fn with_d(mut self, d: usize) -> Self {
        self.stats.d = d;
        self
    }
}

/// Builds the instance of `row` at full scale.
pub fn build_sec6_instance(row: &str, seed: u64) -> Result<Instance> {
    build_instance(&InstanceSpec::sec6(row)?, seed)
}

pub fn build_instance(spec: &InstanceSpec, seed: u64) -> Result<Instance> {
    let st = &spec.stats;
    if st.d == 0 || !(0.0..=1.0).contains(&st.class_prob) {
        return Err(Error::Parameter("d must be positive and class_prob in [0, 1]".into()));
    }
    let graph = generate(&spec.topology, Some(spec.cap_range), seed)?;
    let (placement, paths) = place_and_route(&graph, spec.num_sources, spec.num_learners, spec.num_types, seed)?;
    let (ns, nl, nt, d) = (spec.num_sources, spec.num_learners, spec.num_types, st.d);

    let mut r = rng::stream(seed, &[KEY_STATS]);
    let rates = (0..ns).map(|_| (0..nt).map(|_| uniform(&mut r, st.rate_range)).collect()).collect();
    let noise_var = (0..ns).map(|_| (0..nt).map(|_| uniform(&mut r, st.noise_range)).collect()).collect();
    let source_var = (0..ns)
        .map(|_| {
            (0..d)
                .map(|_| {
                    let well = uniform(&mut r, (0.0, 1.0)) < st.class_prob;
                    uniform(&mut r, if well { st.well_known_var } else { st.poorly_known_var })
                })
                .collect()
        })
        .collect();
    let mut prior_mean = vec![vec![0.0; d]; nl];
    let mut prior_var = vec![vec![0.0; d]; nl];
    for l in 0..nl {
        for i in 0..d {
            let interested = uniform(&mut r, (0.0, 1.0)) < st.class_prob;
            if interested {
                prior_var[l][i] = uniform(&mut r, st.interested_var);
                prior_mean[l][i] = st.interested_mean;
            } else {
                prior_var[l][i] = uniform(&mut r, st.indifferent_var);
                prior_mean[l][i] = st.indifferent_mean;
            }
        }
    }
    let config = ProblemConfig { d, horizon: st.horizon, rates, source_var, noise_var, prior_mean, prior_var };
    Instance::new(graph, placement, paths, config)
}

/// Solver and metric settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    pub solvers: Vec<String>,
    /// Outer iterations K.
    pub k: usize,
    pub n1: usize,
    pub n2: usize,
    pub coupled: bool,
    pub pd: PdConfig,
    /// PGA step as a multiple of the largest source rate.
    pub pga_step_scale: f64,
    pub maxfair_iters: usize,
    pub eval_n1: usize,
    pub eval_n2: usize,
    pub reps_data: usize,
    pub reps_model: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            solvers: SOLVERS.iter().map(|s| s.to_string()).collect(),
            k: 50,
            n1: 50,
            n2: 50,
            coupled: true,
            pd: PdConfig::default(),
            pga_step_scale: 0.02,
            maxfair_iters: 1000,
            eval_n1: 100,
            eval_n2: 100,
            reps_data: 2500,
            reps_model: 20,
        }
    }
}

impl SolverSettings {
    /// Desk profile: metric replicates scaled down 10×.
    pub fn desk() -> Self {
        SolverSettings { eval_n1: 10, eval_n2: 10, reps_data: 250, reps_model: 2, ..Default::default() }
    }
}

pub const SOLVERS: [&str; 8] = ["fw", "pga", "maxtp", "maxfair", "dfw", "dpga", "dmaxtp", "dmaxfair"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVar {
    None,
    Stepsize,
    SourceRate,
    NumSources,
    NumLearners,
}

impl SweepVar {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepVar::None => "none",
            SweepVar::Stepsize => "stepsize",
            SweepVar::SourceRate => "source_rate",
            SweepVar::NumSources => "num_sources",
            SweepVar::NumLearners => "num_learners",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "none" => SweepVar::None,
            "stepsize" => SweepVar::Stepsize,
            "source_rate" => SweepVar::SourceRate,
            "num_sources" => SweepVar::NumSources,
            "num_learners" => SweepVar::NumLearners,
            other => return Err(Error::Parameter(format!("unknown sweep variable `{other}`"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub var: SweepVar,
    pub values: Vec<f64>,
}

impl Default for Sweep {
    fn default() -> Self {
        Sweep { var: SweepVar::None, values: vec![0.0] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub instance: InstanceSpec,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub sweep: Sweep,
    pub seeds: Vec<u64>,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Parameter("at least one seed is required".into()));
        }
        if self.sweep.values.is_empty() {
            return Err(Error::Parameter("sweep needs at least one value".into()));
        }
        let w = &self.sweep.values;
        let up = w.windows(2).all(|p| p[0] <= p[1]);
        let down = w.windows(2).all(|p| p[0] >= p[1]);
        if !(up || down) {
            return Err(Error::Parameter("sweep values must be monotone".into()));
        }
        for s in &self.solver.solvers {
            if !SOLVERS.contains(&s.as_str()) {
                return Err(Error::Parameter(format!("unknown solver `{s}`")));
            }
        }
        Ok(())
    }

    /// Instance spec and primal-dual settings of one sweep value.
    pub fn cell(&self, value: f64) -> Result<(InstanceSpec, PdConfig)> {
        let mut inst = self.instance.clone();
        let mut pd = self.solver.pd.clone();
        let count = |v: f64| -> Result<usize> {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::Parameter(format!("sweep value {v} is not a positive count")))
            }
        };
        match self.sweep.var {
            SweepVar::None => {}
            SweepVar::Stepsize => {
                pd.step_primal = value;
                pd.step_edge = value;
                pd.step_source = value;
                pd.step_nonneg = value;
            }
            SweepVar::SourceRate => inst.stats.rate_range = (value, value),
            SweepVar::NumSources => inst.num_sources = count(value)?,
            SweepVar::NumLearners => inst.num_learners = count(value)?,
        }
        Ok((inst, pd))
    }
}

/// One CSV row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub solver: String,
    pub sweep_var: String,
    pub sweep_value: f64,
    pub seed: u64,
    pub utility: f64,
    pub utility_stderr: f64,
    pub infeasibility: f64,
    pub est_error: f64,
    pub runtime_s: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellFailure {
    pub solver: String,
    pub sweep_value: f64,
    pub seed: u64,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExperimentResult {
    /// Rows produced by this run, plus rows found in a resumed file.
    pub rows: Vec<ResultRow>,
    /// Failed cells; their rows carry NaN metrics.
    pub failures: Vec<CellFailure>,
    /// Per-round state of distributed runs, when tracing.
    pub trace: Vec<TraceRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub solver: String,
    pub sweep_value: f64,
    pub seed: u64,
    pub round: usize,
    pub entity: String,
    pub variable: String,
    pub value: f64,
}

/// Allocation and, for distributed solvers, the round trace.
pub fn solve(name: &str, inst: &Instance, settings: &SolverSettings, pd: &PdConfig, seed: u64) -> Result<(Vec<f64>, Vec<RoundRow>)> {
    let params = EstimatorParams { n1: settings.n1, n2: settings.n2, coupled: settings.coupled, seed: rng::mix(seed, &[KEY_SOLVER]) };
    let gamma = pga_step(inst, settings.pga_step_scale);
    let central = |lambda: Vec<f64>| (lambda, Vec::new());
    Ok(match name {
        "fw" => central(fw_solve(inst, settings.k, &params)?.0),
        "pga" => central(pga_solve(inst, settings.k, gamma, &params)?.0),
        "maxtp" => central(maxtp_solve(inst)?),
        "maxfair" => central(maxfair_solve(inst, settings.maxfair_iters)?),
        "dfw" | "dpga" | "dmaxtp" | "dmaxfair" => {
            let out = match name {
                "dfw" => dfw_solve(inst, settings.k, pd, &params)?,
                "dpga" => dpga_solve(inst, settings.k, gamma, pd, &params)?,
                "dmaxtp" => dmax_solve(inst, Baseline::Tp, pd)?,
                _ => dmax_solve(inst, Baseline::Fair, pd)?,
            };
            (out.lambda, out.rounds)
        }
        other => return Err(Error::Parameter(format!("unknown solver `{other}`"))),
    })
}

/// Utility, infeasibility and estimation error of an allocation. The
/// evaluation streams depend only on the seed, so solvers are compared on
/// common random numbers.
pub fn evaluate(inst: &Instance, lambda: &[f64], settings: &SolverSettings, seed: u64) -> Result<(f64, f64, f64, f64)> {
    let eval_seed = rng::mix(seed, &[KEY_EVAL]);
    let u = utility_mc(inst, lambda, settings.eval_n1, settings.eval_n2, eval_seed);
    let err = if settings.reps_data > 0 && settings.reps_model > 0 {
        estimation_error(inst, lambda, settings.reps_data, settings.reps_model, eval_seed)?.mean
    } else {
        f64::NAN
    };
    Ok((u.mean, u.stderr, inst.infeasibility(lambda), err))
}

pub fn read_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let rows: std::result::Result<Vec<ResultRow>, csv::Error> = rdr.deserialize().collect();
    Ok(rows?)
}

pub fn write_csv(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace_csv(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Runs every solver × sweep value × seed cell. With `out`, rows are
/// appended as cells finish and cells already in the file are skipped.
pub fn run(spec: &ExperimentSpec, out: Option<&Path>, trace: bool) -> Result<ExperimentResult> {
    spec.validate()?;
    let mut result = ExperimentResult::default();
    let mut done: HashSet<(String, u64, u64)> = HashSet::new();
    let mut writer = None;
    if let Some(path) = out {
        let existing = path.exists() && std::fs::metadata(path)?.len() > 0;
        if existing {
            for row in read_csv(path)? {
                done.insert((row.solver.clone(), row.sweep_value.to_bits(), row.seed));
                result.rows.push(row);
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        writer = Some(csv::WriterBuilder::new().has_headers(!existing).from_writer(file));
    }

    let var = spec.sweep.var.as_str().to_string();
    for &value in &spec.sweep.values {
        let (inst_spec, mut pd) = spec.cell(value)?;
        pd.trace = trace;
        for &seed in &spec.seeds {
            let pending: Vec<&String> =
                spec.solver.solvers.iter().filter(|s| !done.contains(&((*s).clone(), value.to_bits(), seed))).collect();
            if pending.is_empty() {
                continue;
            }
            let inst = match build_instance(&inst_spec, seed) {
                Ok(i) => Some(i),
                Err(e) => {
                    for s in &pending {
                        result.failures.push(CellFailure { solver: (*s).clone(), sweep_value: value, seed, message: e.to_string() });
                    }
                    None
                }
            };
            for name in pending {
                let start = Instant::now();
                let outcome = inst.as_ref().ok_or_else(|| Error::Parameter("instance construction failed".into())).and_then(|inst| {
                    let (lambda, rounds) = solve(name, inst, &spec.solver, &pd, seed)?;
                    let runtime = start.elapsed().as_secs_f64();
                    let metrics = evaluate(inst, &lambda, &spec.solver, seed)?;
                    Ok((metrics, runtime, rounds))
                });
                let row = match outcome {
                    Ok(((utility, utility_stderr, infeasibility, est_error), runtime_s, rounds)) => {
                        result.trace.extend(rounds.into_iter().map(|r| TraceRow {
                            solver: name.clone(),
                            sweep_value: value,
                            seed,
                            round: r.round,
                            entity: r.entity,
                            variable: r.variable,
                            value: r.value,
                        }));
                        ResultRow { solver: name.clone(), sweep_var: var.clone(), sweep_value: value, seed, utility, utility_stderr, infeasibility, est_error, runtime_s }
                    }
                    Err(e) => {
                        if inst.is_some() {
                            result.failures.push(CellFailure { solver: name.clone(), sweep_value: value, seed, message: e.to_string() });
                        }
                        ResultRow {
                            solver: name.clone(),
                            sweep_var: var.clone(),
                            sweep_value: value,
                            seed,
                            utility: f64::NAN,
                            utility_stderr: f64::NAN,
                            infeasibility: f64::NAN,
                            est_error: f64::NAN,
                            runtime_s: start.elapsed().as_secs_f64(),
                        }
                    }
                };
                if let Some(w) = writer.as_mut() {
                    w.serialize(&row)?;
                    w.flush()?;
                }
                result.rows.push(row);
            }
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn er_row_sizes() {
        let spec = InstanceSpec::sec6("er").unwrap();
        assert_eq!((spec.num_sources, spec.num_learners, spec.num_types), (10, 5, 3));
        let inst = build_instance(&spec.with_d(5), 3).unwrap();
        assert_eq!(inst.num_sources(), 10);
        assert_eq!(inst.num_learners(), 5);
        assert_eq!(inst.num_types(), 3);
        assert_eq!(inst.d(), 5);
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let spec = InstanceSpec::desk("geant").unwrap();
        let a = build_instance(&spec, 9).unwrap();
        let b = build_instance(&spec, 9).unwrap();
        assert_eq!(a.config, b.config);
        assert_eq!(a.paths, b.paths);
        assert_eq!(a.capacities(), b.capacities());
    }

    #[test]
    fn parameters_within_ranges() {
        let inst = build_instance(&InstanceSpec::desk("abilene").unwrap(), 1).unwrap();
        let c = &inst.config;
        assert!(c.rates.iter().flatten().all(|&r| (5.0..=8.0).contains(&r)));
        assert!(c.noise_var.iter().flatten().all(|&r| (0.5..=1.0).contains(&r)));
        assert!(c.source_var.iter().flatten().all(|&v| v <= 0.01 || (10.0..=20.0).contains(&v)));
        for (m, v) in c.prior_mean.iter().flatten().zip(c.prior_var.iter().flatten()) {
            assert!((*m == 1.0 && *v <= 0.01) || (*m == 0.0 && (1.0..=2.0).contains(v)));
        }
        assert!(inst.capacities().iter().all(|&c| (5.0..=8.0).contains(&c)));
    }

    #[test]
    fn non_monotone_sweep_rejected() {
        let spec = ExperimentSpec {
            instance: InstanceSpec::desk("abilene").unwrap(),
            solver: SolverSettings::desk(),
            sweep: Sweep { var: SweepVar::Stepsize, values: vec![0.01, 0.03, 0.02] },
            seeds: vec![1],
        };
        assert!(spec.validate().is_err());
    }
}
