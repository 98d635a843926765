mod common;

use expnet::gradient::{estimate_gradient, truncation_level, EstimatorParams};
use expnet::quadrature::{oracle_gradient_1d, oracle_gradient_partial, poisson_tail, ScalarModel};

const UNIT: ScalarModel = ScalarModel { prior_var: 1.0, source_var: 1.0, noise_var: 1.0 };

#[test]
fn unit_model_matches_oracle() {
    for &lt in &[0.5, 1.0, 3.0] {
        let inst = common::scalar(lt, 1.0, 1.0, 1.0);
        let lambda = vec![lt];
        let n_prime = truncation_level(&inst, &lambda);
        let head = oracle_gradient_partial(lt, 1.0, UNIT, n_prime, 64).unwrap();
        let params = EstimatorParams { n1: 20, n2: 200, coupled: true, seed: 3 };
        let est = estimate_gradient(&inst, &lambda, &params, 0);
        let (g, se) = (est.g[0], est.stderr[0]);
        println!("λT={lt}: estimate {g:.5} ± {se:.5}, oracle head {head:.6}");
        assert!((g - head).abs() <= 4.0 * se, "λT={lt}: {g} vs {head} (se {se})");
    }
}

#[test]
fn uncoupled_variant_is_unbiased_but_noisier() {
    let inst = common::scalar(1.0, 1.0, 1.0, 1.0);
    let head = oracle_gradient_partial(1.0, 1.0, UNIT, 10, 64).unwrap();
    let coupled = estimate_gradient(&inst, &[1.0], &EstimatorParams { n1: 20, n2: 100, coupled: true, seed: 9 }, 0);
    let loose = estimate_gradient(&inst, &[1.0], &EstimatorParams { n1: 20, n2: 100, coupled: false, seed: 9 }, 0);
    assert!((loose.g[0] - head).abs() <= 4.0 * loose.stderr[0]);
    assert!(loose.stderr[0] > coupled.stderr[0]);
}

#[test]
fn saturated_prior_has_no_gradient() {
    let inst = common::scalar(2.0, 1e-12, 1.0, 1.0);
    let est = estimate_gradient(&inst, &[2.0], &EstimatorParams { n1: 5, n2: 20, coupled: true, seed: 1 }, 0);
    assert!(est.g[0].abs() < 1e-10);
}

#[test]
fn head_sandwich() {
    for &lt in &[0.5, 1.0, 3.0, 6.0] {
        let n_prime = expnet::gradient::truncation_for(lt);
        let head = oracle_gradient_partial(lt, 1.0, UNIT, n_prime, 64).unwrap();
        let full = oracle_gradient_1d(lt, 1.0, UNIT, 60, 64).unwrap();
        let tail = poisson_tail(lt, n_prime + 1);
        assert!(head <= full);
        assert!(full <= head / (1.0 - tail));
    }
}
