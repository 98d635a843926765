//! Euclidean projection onto the feasible set.
//!
//! Solved as a convex QP over the linearized polytope of [`crate::lp`]:
//! minimize `½‖λ − x‖² + ½ρ‖m‖²` subject to the LP rows and `λ, m ≥ 0`. The
//! tiny weight `ρ` on the auxiliary max-variables keeps the Hessian positive
//! definite; it only nudges `m` toward the max it already equals at the
//! optimum.

use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::lp::{lp_linearize, LinearProgram};

const AUX_WEIGHT: f64 = 1e-7;

/// `argmin_{y ∈ D} ‖y − x‖²`.
pub fn project(inst: &Instance, x: &[f64]) -> Result<Vec<f64>> {
    let lp = lp_linearize(inst);
    project_lp(inst, &lp, x)
}

/// As [`project`] with a prebuilt linearization.
pub fn project_lp(inst: &Instance, lp: &LinearProgram, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != lp.num_paths || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Qp("projection target must be finite with one entry per path".into()));
    }
    let n = lp.num_vars;
    let mut h = vec![1.0; n];
    let mut c = vec![0.0; n];
    for i in 0..lp.num_paths {
        c[i] = -x[i];
    }
    for hi in h.iter_mut().skip(lp.num_paths) {
        *hi = AUX_WEIGHT;
    }
    let z = solve_box_qp(&h, &c, lp)?;
    let mut y: Vec<f64> = z[..lp.num_paths].iter().map(|v| v.max(0.0)).collect();
    let s = inst.feasible_scale(&y);
    if s < 1.0 {
        y.iter_mut().for_each(|v| *v *= s);
    }
    Ok(y)
}

/// Minimizes `½ zᵀ diag(h) z + cᵀ z` over `{z ≥ 0 : rows}`; the rows must
/// admit `z = 0`.
///
/// Dual active-set method: start from the unconstrained minimizer and add the
/// most violated constraint until none is violated, dropping constraints whose
/// multiplier would turn negative. `J` and the triangular `R` factor the
/// working set in the `H`-metric and are kept current with Givens rotations.
pub fn solve_box_qp(h: &[f64], c: &[f64], lp: &LinearProgram) -> Result<Vec<f64>> {
    let n = lp.num_vars;
    let rows = &lp.rows;
    if rows.iter().any(|r| r.rhs < 0.0) {
        return Err(Error::Qp("origin must be feasible".into()));
    }
    if h.len() != n || c.len() != n || h.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::Qp("Hessian must be positive with one entry per variable".into()));
    }
    // Constraints as nᵀz ≥ b: the LP rows negated, then the bounds.
    let m = rows.len() + n;
    let normal = |i: usize| -> Vec<(usize, f64)> {
        if i < rows.len() {
            rows[i].coeffs.iter().map(|&(j, a)| (j, -a)).collect()
        } else {
            vec![(i - rows.len(), 1.0)]
        }
    };
    let bound = |i: usize| if i < rows.len() { -rows[i].rhs } else { 0.0 };
    let scale = 1.0 + c.iter().fold(0.0f64, |a, b| a.max(b.abs())) + rows.iter().fold(0.0f64, |a, r| a.max(r.rhs));
    let tol = 1e-11 * scale;

    let mut z: Vec<f64> = (0..n).map(|i| -c[i] / h[i]).collect();
    // Column-major n×n.
    let mut j = vec![0.0; n * n];
    for i in 0..n {
        j[i * n + i] = 1.0 / h[i].sqrt();
    }
    let mut r: Vec<Vec<f64>> = Vec::new(); // columns of the upper-triangular R
    let mut active: Vec<usize> = Vec::new();
    let mut u: Vec<f64> = Vec::new();
    let mut in_active = vec![false; m];

    let max_iter = 50 * (n + m) + 500;
    let mut iter = 0;
    loop {
        // Most violated constraint, measured relative to its normal.
        let mut pick: Option<(usize, f64)> = None;
        for i in (0..m).filter(|&i| !in_active[i]) {
            let nv = normal(i);
            let slack = nv.iter().map(|&(k, a)| a * z[k]).sum::<f64>() - bound(i);
            let norm = nv.iter().map(|&(_, a)| a * a).sum::<f64>().sqrt();
            let rel = slack / norm;
            if rel < -tol && pick.map_or(true, |(_, v)| rel < v) {
                pick = Some((i, rel));
            }
        }
        let Some((p, _)) = pick else {
            return Ok(z);
        };
        let np = normal(p);
        let mut u_plus = 0.0;
        loop {
            iter += 1;
            if iter > max_iter {
                return Err(Error::Qp(format!("active set did not settle after {max_iter} iterations")));
            }
            let q = active.len();
            let d: Vec<f64> = (0..n).map(|col| np.iter().map(|&(k, a)| a * j[col * n + k]).sum()).collect();
            let mut step = vec![0.0; n];
            for col in q..n {
                if d[col] != 0.0 {
                    for k in 0..n {
                        step[k] += j[col * n + k] * d[col];
                    }
                }
            }
            // r = R⁻¹ d[..q] by back substitution.
            let mut dual = d[..q].to_vec();
            for a in (0..q).rev() {
                dual[a] /= r[a][a];
                for b in 0..a {
                    dual[b] -= r[a][b] * dual[a];
                }
            }
            let mut partial = f64::INFINITY;
            let mut drop = None;
            for (a, &ra) in dual.iter().enumerate() {
                if ra > 0.0 && u[a] / ra < partial {
                    partial = u[a] / ra;
                    drop = Some(a);
                }
            }
            let curv: f64 = np.iter().map(|&(k, a)| a * step[k]).sum();
            let full = if curv > 1e-14 * d.iter().map(|x| x * x).sum::<f64>() {
                let slack = np.iter().map(|&(k, a)| a * z[k]).sum::<f64>() - bound(p);
                (-slack / curv).max(0.0)
            } else {
                f64::INFINITY
            };
            let t = partial.min(full);
            if t.is_infinite() {
                return Err(Error::Qp("constraints are inconsistent".into()));
            }
            if full.is_finite() {
                for k in 0..n {
                    z[k] += t * step[k];
                }
            }
            for (ua, ra) in u.iter_mut().zip(&dual) {
                *ua -= t * ra;
            }
            u_plus += t;
            if t == full {
                add_column(&mut j, &mut r, d, n);
                active.push(p);
                u.push(u_plus);
                in_active[p] = true;
                break;
            }
            let a = drop.expect("partial step has a blocking constraint");
            in_active[active.remove(a)] = false;
            u.remove(a);
            drop_column(&mut j, &mut r, a, n);
        }
    }
}

/// Rotates columns `q..n` of `J` so that `d` has a single entry past `q`,
/// then appends `d[..=q]` to `R`.
fn add_column(j: &mut [f64], r: &mut Vec<Vec<f64>>, mut d: Vec<f64>, n: usize) {
    let q = r.len();
    for col in (q + 1..n).rev() {
        let (a, b) = (d[col - 1], d[col]);
        if b == 0.0 {
            continue;
        }
        let hyp = a.hypot(b);
        let (cs, sn) = (a / hyp, b / hyp);
        d[col - 1] = hyp;
        d[col] = 0.0;
        rotate(j, n, col - 1, col, cs, sn);
    }
    d.truncate(q + 1);
    r.push(d);
}

/// Removes column `k` of `R` and restores its triangular shape.
fn drop_column(j: &mut [f64], r: &mut Vec<Vec<f64>>, k: usize, n: usize) {
    r.remove(k);
    for a in k..r.len() {
        let (x, y) = (r[a][a], r[a][a + 1]);
        let hyp = x.hypot(y);
        let (cs, sn) = (x / hyp, y / hyp);
        for col in r.iter_mut().skip(a) {
            let (p, q) = (col[a], col[a + 1]);
            col[a] = cs * p + sn * q;
            col[a + 1] = -sn * p + cs * q;
        }
        r[a].truncate(a + 1);
        rotate(j, n, a, a + 1, cs, sn);
    }
}

fn rotate(j: &mut [f64], n: usize, c0: usize, c1: usize, cs: f64, sn: f64) {
    for k in 0..n {
        let (a, b) = (j[c0 * n + k], j[c1 * n + k]);
        j[c0 * n + k] = cs * a + sn * b;
        j[c1 * n + k] = -sn * a + cs * b;
    }
}
