use std::path::Path;
use std::process::{Command, Output};

fn expnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_expnet")).args(args).output().expect("binary runs")
}

fn small_config(dir: &Path) -> std::path::PathBuf {
    let out = expnet(&["config", "--row", "abilene", "--desk", "--seeds", "1"]);
    assert!(out.status.success());
    let mut spec: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    spec["solver"]["solvers"] = serde_json::json!(["maxtp", "dmaxtp"]);
    spec["solver"]["reps_data"] = 20.into();
    let path = dir.join("spec.json");
    std::fs::write(&path, serde_json::to_string(&spec).unwrap()).unwrap();
    path
}

fn data_lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().skip(1).map(str::to_string).collect()
}

#[test]
fn run_writes_and_resumes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let csv = dir.path().join("results.csv");
    let args = ["run", "--config", cfg.to_str().unwrap(), "--out", csv.to_str().unwrap()];
    let out = expnet(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let header = std::fs::read_to_string(&csv).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header, "solver,sweep_var,sweep_value,seed,utility,utility_stderr,infeasibility,est_error,runtime_s");
    assert_eq!(data_lines(&csv).len(), 2);

    // Completed cells are skipped on a rerun.
    assert!(expnet(&args).status.success());
    assert_eq!(data_lines(&csv).len(), 2);

    let mut sweep = args.to_vec();
    sweep.extend(["--sweep", "stepsize=0.01,0.02"]);
    assert!(expnet(&sweep).status.success());
    let rows = data_lines(&csv);
    assert_eq!(rows.len(), 6);
    assert_eq!(rows.iter().filter(|r| r.contains(",stepsize,")).count(), 4);
}

#[test]
fn trace_file_has_round_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let csv = dir.path().join("r.csv");
    let out = expnet(&["run", "--config", cfg.to_str().unwrap(), "--out", csv.to_str().unwrap(), "--trace"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let trace = std::fs::read_to_string(dir.path().join("r.trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next().unwrap(), "solver,sweep_value,seed,round,entity,variable,value");
    assert!(lines.count() > 1000);
}

#[test]
fn non_monotone_sweep_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = expnet(&["run", "--config", cfg.to_str().unwrap(), "--sweep", "stepsize=0.02,0.01,0.03"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("monotone"));
}

#[test]
fn topo_writes_edge_list() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.edges");
    let out = expnet(&["topo", "--kind", "grid", "--nodes", "25", "--seed", "1", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    // 5x5 grid: 40 undirected links, each in both directions.
    assert_eq!(text.lines().count(), 80);
    for line in text.lines() {
        let cap: f64 = line.split_whitespace().nth(2).unwrap().parse().unwrap();
        assert!((5.0..=10.0).contains(&cap));
    }
    let again = expnet(&["topo", "--kind", "grid", "--nodes", "25", "--seed", "1"]);
    assert_eq!(String::from_utf8(again.stdout).unwrap(), text);
}

#[test]
fn unknown_kind_fails() {
    let out = expnet(&["topo", "--kind", "torus"]);
    assert!(!out.status.success());
}
