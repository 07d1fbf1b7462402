//! Vertex enumeration of `min err(p)  s.t. |lhs_g(p)| ≤ γ, p ∈ [0, 1]^n`.
//!
//! Both objective and constraints are affine in the per-cell probabilities.
//! At a vertex at most one row per group is independently tight, so at most
//! `r` coordinates (`r` = number of groups with a nonzero row) are fractional;
//! those solve a square system built from tight rows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{self, Regressor};
use crate::model::{BaseRates, CellDistribution};

/// Enumeration stops with an error beyond this many candidate points.
pub const MAX_CANDIDATES: u128 = 200_000_000;

const FEASIBILITY: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexSolution {
    pub opt_value: f64,
    pub probs: Vec<f64>,
    pub candidates: u64,
}

struct Affine {
    err0: f64,
    err_coef: Vec<f64>,
    lhs0: Vec<f64>,
    /// `lhs_coef[g][i]`
    lhs_coef: Vec<Vec<f64>>,
}

fn affine_model(dist: &CellDistribution, regressor: Regressor, base: &BaseRates) -> Result<Affine> {
    let f = metrics::regressor_values(dist, regressor)?;
    let groups = dist.group_count();
    let n = dist.len();
    let mut err0 = 0.0;
    let mut err_coef = vec![0.0; n];
    let mut lhs0 = vec![0.0; groups];
    let mut lhs_coef = vec![vec![0.0; n]; groups];
    for (i, (c, &fv)) in dist.cells().iter().zip(&f).enumerate() {
        err0 += c.mass * fv;
        err_coef[i] = c.mass * (1.0 - 2.0 * fv);
        let u0 = metrics::rate_term(base.notion, 0.0, fv);
        let u1 = metrics::rate_term(base.notion, 1.0, fv);
        for g in 0..groups {
            let centered = if c.in_group(g) { 1.0 } else { 0.0 } - base.beta[g];
            lhs0[g] += c.mass * centered * u0;
            lhs_coef[g][i] = c.mass * centered * (u1 - u0);
        }
    }
    Ok(Affine {
        err0,
        err_coef,
        lhs0,
        lhs_coef,
    })
}

fn binomial(n: usize, k: usize) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Solves `a x = b` in place by Gaussian elimination with partial pivoting.
fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let s = b.len();
    for col in 0..s {
        let piv = (col..s).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[piv][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..s {
            let factor = a[r][col] / a[col][col];
            if factor != 0.0 {
                let (top, bottom) = a.split_at_mut(r);
                for (x, y) in bottom[0][col..s].iter_mut().zip(&top[col][col..s]) {
                    *x -= factor * y;
                }
                b[r] -= factor * b[col];
            }
        }
    }
    let mut x = vec![0.0; s];
    for r in (0..s).rev() {
        let tail: f64 = (r + 1..s).map(|j| a[r][j] * x[j]).sum();
        x[r] = (b[r] - tail) / a[r][r];
    }
    Some(x)
}

/// Exact optimum of the per-cell randomized LP by vertex enumeration.
pub fn vertex_optimum(
    dist: &CellDistribution,
    regressor: Regressor,
    base: &BaseRates,
    gamma: f64,
) -> Result<VertexSolution> {
    let model = affine_model(dist, regressor, base)?;
    let n = dist.len();
    let active: Vec<usize> = (0..dist.group_count())
        .filter(|&g| model.lhs_coef[g].iter().any(|&a| a != 0.0))
        .collect();
    // rows with a zero coefficient vector are constant constraints
    for g in 0..dist.group_count() {
        if !active.contains(&g) && model.lhs0[g].abs() > gamma + FEASIBILITY {
            return Err(Error::Infeasible);
        }
    }
    let r = active.len().min(n);
    let total: u128 = (0..=r)
        .map(|s| binomial(n, s) * binomial(active.len(), s) * (1u128 << s) * (1u128 << (n - s)))
        .sum();
    if total > MAX_CANDIDATES {
        return Err(Error::InvalidConfig(format!(
            "vertex enumeration would visit {total} candidates (limit {MAX_CANDIDATES})"
        )));
    }

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut candidates = 0u64;
    let mut p = vec![0.0; n];
    for s in 0..=r {
        for frac in combinations(n, s) {
            let rest: Vec<usize> = (0..n).filter(|i| !frac.contains(i)).collect();
            for rows in combinations(active.len(), s) {
                let rows: Vec<usize> = rows.iter().map(|&k| active[k]).collect();
                let matrix: Vec<Vec<f64>> = rows
                    .iter()
                    .map(|&g| frac.iter().map(|&i| model.lhs_coef[g][i]).collect())
                    .collect();
                for signs in 0..(1u32 << s) {
                    for assign in 0..(1u64 << rest.len()) {
                        candidates += 1;
                        for (bit, &i) in rest.iter().enumerate() {
                            p[i] = ((assign >> bit) & 1) as f64;
                        }
                        let rhs: Vec<f64> = rows
                            .iter()
                            .enumerate()
                            .map(|(k, &g)| {
                                let sign = if (signs >> k) & 1 == 1 { -1.0 } else { 1.0 };
                                let fixed: f64 = rest.iter().map(|&i| model.lhs_coef[g][i] * p[i]).sum();
                                sign * gamma - model.lhs0[g] - fixed
                            })
                            .collect();
                        let Some(x) = solve_square(matrix.clone(), rhs) else {
                            continue;
                        };
                        if x.iter().any(|&v| !(-FEASIBILITY..=1.0 + FEASIBILITY).contains(&v)) {
                            continue;
                        }
                        for (&i, &v) in frac.iter().zip(&x) {
                            p[i] = v.clamp(0.0, 1.0);
                        }
                        let feasible = active.iter().all(|&g| {
                            let v: f64 =
                                model.lhs0[g] + model.lhs_coef[g].iter().zip(&p).map(|(a, x)| a * x).sum::<f64>();
                            v.abs() <= gamma + FEASIBILITY
                        });
                        if !feasible {
                            continue;
                        }
                        let err = model.err0 + model.err_coef.iter().zip(&p).map(|(a, x)| a * x).sum::<f64>();
                        if best.as_ref().is_none_or(|(b, _)| err < *b) {
                            best = Some((err, p.clone()));
                        }
                    }
                }
            }
        }
    }
    let (opt_value, probs) = best.ok_or(Error::Infeasible)?;
    Ok(VertexSolution {
        opt_value,
        probs,
        candidates,
    })
}
