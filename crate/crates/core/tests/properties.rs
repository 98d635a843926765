mod common;

use std::sync::OnceLock;

use proptest::prelude::*;

use expnet::distributed::{pd_inner, PdConfig};
use expnet::experiments::{build_instance, read_csv, write_csv, InstanceSpec, ResultRow};
use expnet::gradient::{estimate_gradient, EstimatorParams};
use expnet::info::InfoMatrix;
use expnet::lp::lp_direction;
use expnet::objective::{g_value, marginal_gain, utility_mc, SampleBatch};
use expnet::qp::project;
use expnet::Instance;

fn geant() -> &'static Instance {
    static INST: OnceLock<Instance> = OnceLock::new();
    INST.get_or_init(|| build_instance(&InstanceSpec::desk("geant").unwrap(), 1).unwrap())
}

fn star() -> &'static Instance {
    static INST: OnceLock<Instance> = OnceLock::new();
    INST.get_or_init(|| build_instance(&InstanceSpec::desk("star").unwrap(), 2).unwrap())
}

fn instances() -> impl Strategy<Value = &'static Instance> {
    prop_oneof![Just(geant()), Just(star())]
}

/// Instance plus a vector of per-path values in `[0, hi]`.
fn with_point(hi: f64) -> impl Strategy<Value = (&'static Instance, Vec<f64>)> {
    instances().prop_flat_map(move |inst| (Just(inst), prop::collection::vec(0.0..hi, inst.num_paths())))
}

fn scaled_feasible(inst: &Instance, x: &[f64]) -> Vec<f64> {
    let s = inst.feasible_scale(x);
    x.iter().map(|v| v * s).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn logdet_telescopes(
        d in 1usize..8,
        counts in prop::collection::vec(0usize..12, 1..4),
        seed in any::<u64>(),
    ) {
        use rand::Rng;
        let mut rng = expnet::rng::stream(seed, &[1]);
        let prior: Vec<f64> = (0..d).map(|_| rng.random_range(0.01..4.0)).collect();
        let noise: Vec<f64> = counts.iter().map(|_| rng.random_range(0.1..2.0)).collect();
        let mut batch = SampleBatch::empty(counts.len());
        for (s, &n) in counts.iter().enumerate() {
            for _ in 0..n {
                batch.features[s].push((0..d).map(|_| rng.random_range(-3.0..3.0)).collect());
            }
        }
        let g = g_value(&prior, &batch, &noise).unwrap();
        let mut info = InfoMatrix::identity(d);
        let mut sum = 0.0;
        for (s, feats) in batch.features.iter().enumerate() {
            for x in feats {
                let gain = marginal_gain(&mut info, &prior, x, noise[s]);
                prop_assert!(gain >= 0.0);
                sum += gain;
            }
        }
        prop_assert!((g - sum).abs() <= 1e-9 * g.abs().max(1.0));
    }

    #[test]
    fn feasible_set_is_down_closed((inst, x) in with_point(12.0), shrink in prop::collection::vec(0.0..=1.0f64, 64)) {
        let top = scaled_feasible(inst, &x);
        prop_assert!(inst.is_feasible(&top, 1e-9));
        let below: Vec<f64> = top.iter().zip(&shrink).map(|(t, s)| t * s).collect();
        prop_assert!(inst.is_feasible(&below, 1e-9));
    }

    #[test]
    fn theta_norm_over_approximates_max((inst, x) in with_point(12.0), theta in 1.0..40.0f64) {
        for e in 0..inst.num_edges() {
            let exact = inst.edge_load(&x, e, None);
            let relaxed = inst.edge_load(&x, e, Some(theta));
            prop_assert!(relaxed >= exact - 1e-12 * exact.max(1.0));
        }
        for g in 0..inst.num_groups() {
            let exact = inst.source_load(&x, g, None);
            let relaxed = inst.source_load(&x, g, Some(theta));
            let n = inst.paths.groups[g].paths.len() as f64;
            prop_assert!(relaxed >= exact - 1e-12 * exact.max(1.0));
            prop_assert!(relaxed <= n.powf(1.0 / theta) * exact + 1e-9);
        }
    }

    #[test]
    fn projection_satisfies_variational_inequality((inst, x) in with_point(15.0), z in prop::collection::vec(0.0..10.0f64, 64)) {
        let y = project(inst, &x).unwrap();
        prop_assert!(inst.is_feasible(&y, 1e-9));
        let z = scaled_feasible(inst, &z[..inst.num_paths()]);
        let resid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        let step: Vec<f64> = z.iter().zip(&y).map(|(a, b)| a - b).collect();
        let scale = 1.0 + x.iter().map(|v| v * v).sum::<f64>();
        prop_assert!(dot(&resid, &step) <= 1e-6 * scale, "⟨x−y, z−y⟩ = {}", dot(&resid, &step));
        // Feasible points are their own projection.
        let again = project(inst, &y).unwrap();
        for (a, b) in again.iter().zip(&y) {
            prop_assert!((a - b).abs() <= 1e-6 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn lp_direction_is_optimal((inst, g) in with_point(1.0), z in prop::collection::vec(0.0..10.0f64, 64)) {
        let v = lp_direction(inst, &g).unwrap();
        prop_assert!(inst.is_feasible(&v, 1e-9));
        let z = scaled_feasible(inst, &z[..inst.num_paths()]);
        prop_assert!(dot(&g, &v) >= dot(&g, &z) - 1e-9);
    }

    #[test]
    fn duals_nonnegative_every_round((inst, g) in with_point(2.0), step in 0.001..0.03f64, boxed in any::<bool>()) {
        let cfg = PdConfig { rounds: 150, trace: true, box_projection: boxed, ..PdConfig::with_step(step) };
        let out = pd_inner(inst, &g, &cfg).unwrap();
        prop_assert!(out.audit.is_clean());
        for row in out.rounds.iter().filter(|r| !r.variable.starts_with('v')) {
            prop_assert!(row.value >= 0.0, "{row:?}");
        }
        let again = pd_inner(inst, &g, &cfg).unwrap();
        prop_assert_eq!(bits(&out.lambda), bits(&again.lambda));
    }

    #[test]
    fn utility_is_reproducible_and_monotone((inst, x) in with_point(6.0), bump in 0.0..3.0f64, seed in any::<u64>()) {
        let a = utility_mc(inst, &x, 6, 4, seed);
        prop_assert_eq!(bits(&a.replicates), bits(&utility_mc(inst, &x, 6, 4, seed).replicates));
        let up: Vec<f64> = x.iter().map(|v| v + bump).collect();
        let b = utility_mc(inst, &up, 6, 4, seed);
        // Common random numbers: more arrivals per replicate only add samples.
        for (lo, hi) in a.replicates.iter().zip(&b.replicates) {
            prop_assert!(hi >= &(lo - 1e-9));
        }
    }

    #[test]
    fn gradient_is_reproducible((inst, x) in with_point(4.0), seed in any::<u64>()) {
        let p = EstimatorParams { n1: 3, n2: 3, coupled: true, seed };
        let a = estimate_gradient(inst, &x, &p, 7);
        let b = estimate_gradient(inst, &x, &p, 7);
        prop_assert_eq!(bits(&a.g), bits(&b.g));
        prop_assert_eq!(bits(&a.stderr), bits(&b.stderr));
    }

    #[test]
    fn csv_round_trip(rows in prop::collection::vec(result_row(), 0..20)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        write_csv(&path, &rows).unwrap();
        let back = if rows.is_empty() { Vec::new() } else { read_csv(&path).unwrap() };
        prop_assert_eq!(back.len(), rows.len());
        for (a, b) in rows.iter().zip(&back) {
            prop_assert_eq!(&a.solver, &b.solver);
            prop_assert_eq!(&a.sweep_var, &b.sweep_var);
            prop_assert_eq!(a.seed, b.seed);
            let fa = [a.sweep_value, a.utility, a.utility_stderr, a.infeasibility, a.est_error, a.runtime_s];
            let fb = [b.sweep_value, b.utility, b.utility_stderr, b.infeasibility, b.est_error, b.runtime_s];
            prop_assert_eq!(bits(&fa), bits(&fb));
        }
    }
}

fn bits(xs: &[f64]) -> Vec<u64> {
    xs.iter().map(|x| x.to_bits()).collect()
}

fn metric() -> impl Strategy<Value = f64> {
    prop_oneof![4 => -1e6..1e6f64, 1 => Just(f64::NAN), 1 => Just(0.0)]
}

fn result_row() -> impl Strategy<Value = ResultRow> {
    (
        prop::sample::select(vec!["fw", "dfw", "pga", "dpga", "maxtp", "dmaxfair"]),
        prop::sample::select(vec!["none", "stepsize", "source_rate"]),
        -100.0..100.0f64,
        any::<u64>(),
        prop::array::uniform5(metric()),
    )
        .prop_map(|(solver, var, value, seed, m)| ResultRow {
            solver: solver.into(),
            sweep_var: var.into(),
            sweep_value: value,
            seed,
            utility: m[0],
            utility_stderr: m[1],
            infeasibility: m[2],
            est_error: m[3],
            runtime_s: m[4],
        })
}
