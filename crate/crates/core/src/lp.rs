//! Linear description of the feasible set and a dense simplex solver.
//!
//! The multicast max on an edge is linearized with one auxiliary variable
//! `m` per (edge, group) pair that has two or more member paths on the edge:
//! `λ_p − m ≤ 0` for each member and `m` enters the edge row in place of the
//! max. Single-path groups enter the edge row directly. The source
//! constraint `max_p λ_p ≤ λ_{s,t}` becomes one row `λ_p ≤ λ_{s,t}` per path.
//! Projected onto the path coordinates, the polytope is exactly D.

use crate::error::{Error, Result};
use crate::instance::Instance;

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    /// Sorted by variable index.
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl Row {
    pub fn dot(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(i, a)| a * x[i]).sum()
    }
}

/// `{ x >= 0 : rows }`, with the first `num_paths` variables being λ.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram {
    pub num_vars: usize,
    pub num_paths: usize,
    pub rows: Vec<Row>,
    /// Auxiliary variables in variable order.
    pub aux: Vec<AuxVar>,
}

/// Stands for the max over `paths` (members of `group` on `edge`).
#[derive(Clone, Debug, PartialEq)]
pub struct AuxVar {
    pub edge: usize,
    pub group: usize,
    pub paths: Vec<usize>,
}

impl LinearProgram {
    pub fn num_aux(&self) -> usize {
        self.num_vars - self.num_paths
    }

    /// Extends path rates with the smallest feasible auxiliary values.
    pub fn lift(&self, lambda: &[f64]) -> Vec<f64> {
        let mut x = lambda.to_vec();
        x.extend(self.aux.iter().map(|a| a.paths.iter().map(|&p| lambda[p]).fold(0.0, f64::max)));
        x
    }
}

pub fn lp_linearize(inst: &Instance) -> LinearProgram {
    let np = inst.num_paths();
    let mut rows = Vec::new();
    let mut aux = Vec::new();
    for e in 0..inst.num_edges() {
        let groups = inst.edge_groups(e);
        if groups.is_empty() {
            continue;
        }
        let mut edge_row = Vec::new();
        for eg in groups {
            if eg.paths.len() == 1 {
                edge_row.push((eg.paths[0], 1.0));
            } else {
                let m = np + aux.len();
                aux.push(AuxVar { edge: e, group: eg.group, paths: eg.paths.clone() });
                for &p in &eg.paths {
                    rows.push(Row { coeffs: vec![(p, 1.0), (m, -1.0)], rhs: 0.0 });
                }
                edge_row.push((m, 1.0));
            }
        }
        edge_row.sort_by_key(|&(i, _)| i);
        rows.push(Row { coeffs: edge_row, rhs: inst.capacity(e) });
    }
    for p in 0..np {
        rows.push(Row { coeffs: vec![(p, 1.0)], rhs: inst.group_rate(inst.group_of_path(p)) });
    }
    LinearProgram { num_vars: np + aux.len(), num_paths: np, rows, aux }
}

/// Maximizes `c·x` over `{x >= 0 : A x <= b}` with `b >= 0`, so the origin
/// is a starting vertex. Dantzig pricing, switching to Bland's rule after a
/// run of degenerate pivots.
pub fn simplex_max(c: &[f64], lp: &LinearProgram) -> Result<(Vec<f64>, f64)> {
    let n = lp.num_vars;
    let m = lp.rows.len();
    if c.len() != n {
        return Err(Error::Lp(format!("objective has {} entries, expected {n}", c.len())));
    }
    if lp.rows.iter().any(|r| r.rhs < 0.0 || !r.rhs.is_finite()) {
        return Err(Error::Lp("right-hand sides must be finite and >= 0".into()));
    }
    let width = n + m + 1;
    let mut t = vec![0.0; (m + 1) * width];
    for (i, row) in lp.rows.iter().enumerate() {
        for &(j, a) in &row.coeffs {
            t[i * width + j] += a;
        }
        t[i * width + n + i] = 1.0;
        t[i * width + width - 1] = row.rhs;
    }
    let obj = m * width;
    for (j, &cj) in c.iter().enumerate() {
        t[obj + j] = -cj;
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    let scale = c.iter().fold(1e-300f64, |a, b| a.max(b.abs()));
    let eps = 1e-11;
    let max_iter = 50 * (n + m) + 100;
    let mut degenerate = 0;
    for _ in 0..max_iter {
        let bland = degenerate > 20;
        let mut enter = None;
        let mut best = -eps * scale;
        for j in 0..n + m {
            let r = t[obj + j];
            if r < best {
                enter = Some(j);
                if bland {
                    break;
                }
                best = r;
            }
        }
        let Some(q) = enter else {
            let mut x = vec![0.0; n];
            for (i, &b) in basis.iter().enumerate() {
                if b < n {
                    x[b] = t[i * width + width - 1].max(0.0);
                }
            }
            let value = c.iter().zip(&x).map(|(a, b)| a * b).sum();
            return Ok((x, value));
        };
        let mut leave: Option<usize> = None;
        let mut ratio = f64::INFINITY;
        for i in 0..m {
            let a = t[i * width + q];
            if a > 1e-12 {
                let r = t[i * width + width - 1].max(0.0) / a;
                let better = match leave {
                    None => true,
                    Some(l) => r < ratio - 1e-15 || (r <= ratio + 1e-15 && basis[i] < basis[l]),
                };
                if better {
                    ratio = r;
                    leave = Some(i);
                }
            }
        }
        let Some(p) = leave else {
            return Err(Error::Lp("objective is unbounded".into()));
        };
        degenerate = if ratio <= 1e-15 { degenerate + 1 } else { 0 };
        pivot(&mut t, width, m + 1, p, q);
        basis[p] = q;
    }
    Err(Error::Lp(format!("no optimum after {max_iter} pivots")))
}

fn pivot(t: &mut [f64], width: usize, rows: usize, p: usize, q: usize) {
    let pv = t[p * width + q];
    for v in &mut t[p * width..(p + 1) * width] {
        *v /= pv;
    }
    let prow: Vec<f64> = t[p * width..(p + 1) * width].to_vec();
    for i in 0..rows {
        if i == p {
            continue;
        }
        let f = t[i * width + q];
        if f != 0.0 {
            let row = &mut t[i * width..(i + 1) * width];
            for (v, pr) in row.iter_mut().zip(&prow) {
                *v -= f * pr;
            }
            row[q] = 0.0;
        }
    }
}

/// `argmax_{v ∈ D} ⟨v, g⟩`. Nonpositive gradient coordinates stay at 0.
pub fn lp_direction(inst: &Instance, gradient: &[f64]) -> Result<Vec<f64>> {
    let lp = lp_linearize(inst);
    let mut c = vec![0.0; lp.num_vars];
    c[..gradient.len()].copy_from_slice(gradient);
    if c.iter().any(|x| !x.is_finite()) {
        return Err(Error::Lp("gradient is not finite".into()));
    }
    let (x, _) = simplex_max(&c, &lp)?;
    let mut v = x[..lp.num_paths].to_vec();
    let s = inst.feasible_scale(&v);
    if s < 1.0 {
        v.iter_mut().for_each(|x| *x *= s);
    }
    Ok(v)
}
