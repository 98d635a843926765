use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use expnet::experiments::{self, ExperimentSpec, InstanceSpec, SolverSettings, Sweep, SweepVar};
use expnet::topology::{generate, Topology};

#[derive(Parser)]
#[command(name = "expnet", version, about = "Rate allocation for multicast experimental design networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the sweep, e.g. `stepsize=0.005,0.01,0.02`.
        #[arg(long)]
        sweep: Option<String>,
        /// Results CSV; existing cells are skipped and new rows appended.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write per-round primal-dual state next to the results.
        #[arg(long)]
        trace: bool,
    },
    /// Generate a topology and write it as an edge list.
    Topo {
        #[arg(long)]
        kind: String,
        #[arg(long)]
        nodes: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Capacity interval `lo,hi`.
        #[arg(long, default_value = "5,10")]
        caps: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a config for one row of the evaluation table.
    Config {
        #[arg(long, default_value = "geant")]
        row: String,
        /// Small instances and reduced evaluation reps.
        #[arg(long)]
        desk: bool,
        /// Comma-separated seeds.
        #[arg(long, default_value = "1")]
        seeds: String,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { config, sweep, out, trace } => run(&config, sweep.as_deref(), out.as_deref(), trace),
        Command::Topo { kind, nodes, seed, caps, out } => {
            let caps = parse_pair(&caps)?;
            let topology = Topology::from_kind(&kind, nodes)?;
            let graph = generate(&topology, Some(caps), seed)?;
            let text = graph.to_edge_list();
            match out {
                Some(path) => fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?,
                None => print!("{text}"),
            }
            eprintln!("{}: {} nodes, {} edges", topology.name(), graph.num_nodes(), graph.num_edges());
            Ok(())
        }
        Command::Config { row, desk, seeds } => {
            let (instance, solver) =
                if desk { (InstanceSpec::desk(&row)?, SolverSettings::desk()) } else { (InstanceSpec::sec6(&row)?, SolverSettings::default()) };
            let seeds = parse_list(&seeds)?.into_iter().map(|s| s as u64).collect();
            let spec = ExperimentSpec { instance, solver, sweep: Sweep::default(), seeds };
            println!("{}", serde_json::to_string_pretty(&spec)?);
            Ok(())
        }
    }
}

fn run(config: &Path, sweep: Option<&str>, out: Option<&Path>, trace: bool) -> Result<()> {
    let text = fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let mut spec: ExperimentSpec = serde_json::from_str(&text).with_context(|| format!("parsing {}", config.display()))?;
    if let Some(s) = sweep {
        let (var, values) = s.split_once('=').context("--sweep expects var=v1,v2,...")?;
        spec.sweep = Sweep { var: SweepVar::parse(var.trim())?, values: parse_list(values)? };
    }
    let result = experiments::run(&spec, out, trace)?;
    if out.is_none() {
        let mut w = csv::Writer::from_writer(std::io::stdout());
        for row in &result.rows {
            w.serialize(row)?;
        }
        w.flush()?;
    }
    if trace {
        let path = match out {
            Some(p) => p.with_extension("trace.csv"),
            None => PathBuf::from("trace.csv"),
        };
        experiments::write_trace_csv(&path, &result.trace)?;
        eprintln!("trace: {} rows in {}", result.trace.len(), path.display());
    }
    for f in &result.failures {
        eprintln!("failed: {} at {} = {} (seed {}): {}", f.solver, spec.sweep.var.as_str(), f.sweep_value, f.seed, f.message);
    }
    Ok(())
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .filter(|x| !x.trim().is_empty())
        .map(|x| x.trim().parse::<f64>().with_context(|| format!("`{x}` is not a number")))
        .collect()
}

fn parse_pair(s: &str) -> Result<(f64, f64)> {
    match parse_list(s)?.as_slice() {
        &[lo, hi] if lo <= hi => Ok((lo, hi)),
        _ => bail!("expected `lo,hi` with lo <= hi, got `{s}`"),
    }
}
