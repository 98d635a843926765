//! Deterministic reference values for the scalar case (d = 1, one source).
//!
//! With one feature, `Σ_{i≤n} x_i² / Σ_s` is χ²_n, so
//! `E[G | n] = E[log(1 + a χ²_n)]` with `a = Σ₀ Σ_s / σ²`. The expectation
//! is integrated with composite Gauss–Legendre after substituting `y = w²`,
//! and the Poisson sums over `n` are exact.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = x;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `E[log(1 + a χ²_n)]`.
pub fn expected_log1p_chi2(a: f64, n: usize, quad_nodes: usize) -> f64 {
    if n == 0 || a == 0.0 {
        return 0.0;
    }
    let nf = n as f64;
    // Density of w = sqrt(χ²_n): 2 w^{n-1} e^{-w²/2} / (2^{n/2} Γ(n/2)).
    let log_norm = std::f64::consts::LN_2 - 0.5 * nf * std::f64::consts::LN_2 - ln_gamma(0.5 * nf);
    let upper = nf.sqrt() + 14.0;
    let panels = (upper / 0.5).ceil() as usize;
    let width = upper / panels as f64;
    let (x, w) = gauss_legendre(quad_nodes);
    let mut total = 0.0;
    for p in 0..panels {
        let lo = p as f64 * width;
        for (xi, wi) in x.iter().zip(&w) {
            let t = lo + 0.5 * width * (xi + 1.0);
            let log_pdf = log_norm + (nf - 1.0) * t.ln() - 0.5 * t * t;
            total += 0.5 * width * wi * log_pdf.exp() * (a * t * t).ln_1p();
        }
    }
    total
}

pub fn poisson_pmf(mean: f64, n: usize) -> f64 {
    if mean <= 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let nf = n as f64;
    (nf * mean.ln() - mean - ln_gamma(nf + 1.0)).exp()
}

/// `P[n >= k]` for `n ~ Poisson(mean)`.
pub fn poisson_tail(mean: f64, k: usize) -> f64 {
    let head: f64 = (0..k).map(|n| poisson_pmf(mean, n)).sum();
    (1.0 - head).max(0.0)
}

/// Scalar model parameters for the reference gradient.
#[derive(Clone, Copy, Debug)]
pub struct ScalarModel {
    pub prior_var: f64,
    pub source_var: f64,
    pub noise_var: f64,
}

impl ScalarModel {
    fn snr(&self) -> Result<f64> {
        if self.prior_var < 0.0 || self.source_var < 0.0 || !(self.noise_var > 0.0) {
            return Err(Error::Parameter("scalar model needs nonnegative variances and positive noise".into()));
        }
        Ok(self.prior_var * self.source_var / self.noise_var)
    }
}

/// `T Σ_{n=0}^{last} pmf(n; λT) (E[G | n+1] − E[G | n])`.
pub fn oracle_gradient_partial(rate: f64, horizon: f64, model: ScalarModel, last: usize, quad_nodes: usize) -> Result<f64> {
    if rate < 0.0 || horizon < 0.0 {
        return Err(Error::Parameter("rate and horizon must be >= 0".into()));
    }
    let a = model.snr()?;
    let mean = rate * horizon;
    let mut prev = 0.0;
    let mut total = 0.0;
    for n in 0..=last {
        let next = expected_log1p_chi2(a, n + 1, quad_nodes);
        total += poisson_pmf(mean, n) * (next - prev);
        prev = next;
    }
    Ok(total * horizon)
}

/// Reference value of ∂U/∂λ summed to `n_max`.
pub fn oracle_gradient_1d(rate: f64, horizon: f64, model: ScalarModel, n_max: usize, quad_nodes: usize) -> Result<f64> {
    oracle_gradient_partial(rate, horizon, model, n_max, quad_nodes)
}

/// Reference value of `E[G]` at rate λ for the scalar model.
pub fn oracle_utility_1d(rate: f64, horizon: f64, model: ScalarModel, n_max: usize, quad_nodes: usize) -> Result<f64> {
    let a = model.snr()?;
    let mean = rate * horizon;
    Ok((0..=n_max).map(|n| poisson_pmf(mean, n) * expected_log1p_chi2(a, n, quad_nodes)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(8);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((s - 2.0 / 15.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn one_sample_midpoint() {
        // Midpoint rule directly on the χ²_1 density.
        let want = {
            let h: f64 = 1e-4;
            let mut s = 0.0;
            let mut y = h / 2.0;
            while y < 80.0 {
                let pdf = (-y / 2.0).exp() / (2.0 * std::f64::consts::PI * y).sqrt();
                s += pdf * (1.0 + y).ln() * h;
                y += h;
            }
            s
        };
        let got = expected_log1p_chi2(1.0, 1, 64);
        assert!((got - want).abs() < 1e-4, "{got} vs {want}");
    }

    #[test]
    fn large_n_matches_jensen_gap() {
        // For large n, χ²_n/n concentrates: E log(1 + a χ²_n) ≈ log(1 + a n).
        let v = expected_log1p_chi2(0.5, 400, 64);
        assert!((v - (1.0 + 200.0f64).ln()).abs() < 0.01);
    }

    #[test]
    fn zero_rate_keeps_first_term() {
        let m = ScalarModel { prior_var: 1.0, source_var: 1.0, noise_var: 1.0 };
        let g = oracle_gradient_1d(0.0, 2.0, m, 60, 64).unwrap();
        assert!((g - 2.0 * expected_log1p_chi2(1.0, 1, 64)).abs() < 1e-14);
        let flat = ScalarModel { prior_var: 0.0, ..m };
        assert_eq!(oracle_gradient_1d(1.0, 1.0, flat, 60, 64).unwrap(), 0.0);
    }

    #[test]
    fn gradient_matches_utility_slope() {
        let m = ScalarModel { prior_var: 1.0, source_var: 1.0, noise_var: 1.0 };
        let h = 1e-5;
        let slope = (oracle_utility_1d(1.0 + h, 1.0, m, 60, 64).unwrap() - oracle_utility_1d(1.0 - h, 1.0, m, 60, 64).unwrap()) / (2.0 * h);
        let g = oracle_gradient_1d(1.0, 1.0, m, 60, 64).unwrap();
        assert!((slope - g).abs() < 1e-7, "{slope} vs {g}");
    }

    #[test]
    fn pmf_and_tail() {
        assert!((poisson_pmf(1.0, 0) - (-1f64).exp()).abs() < 1e-15);
        assert!((poisson_tail(1.0, 1) - (1.0 - (-1f64).exp())).abs() < 1e-15);
        assert_eq!(poisson_pmf(0.0, 0), 1.0);
    }
}
