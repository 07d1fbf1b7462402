//! Exact ground truth for small instances.
//!
//! [`enumerate_optimum`] solves the constrained problem over mixtures of all
//! `2^n` deterministic cell labelings with a dense simplex. [`vertex_optimum`]
//! reaches the same value by enumerating vertices of the equivalent per-cell
//! randomized LP, sharing no code with the simplex route.

pub mod simplex;
mod vertex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{self, Regressor};
use crate::model::{BaseRates, Cell, CellDistribution, FairnessNotion};
use crate::solver::lagrangian::integrands;
use crate::solver::response::centered_sum;
use crate::solver::DualState;

pub use vertex::{vertex_optimum, VertexSolution};

/// Largest instance the labeling enumeration accepts.
pub const MAX_CELLS: usize = 20;

/// Default feasibility tolerance on the constraint slacks.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Tolerance under which the two pointwise values count as a tie.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportEntry {
    /// Decision per cell.
    pub labeling: Vec<bool>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSolution {
    pub notion: FairnessNotion,
    pub gamma: f64,
    pub opt_value: f64,
    pub support: Vec<SupportEntry>,
    /// Signed constraint values of the optimal mixture.
    pub lhs: Vec<f64>,
    /// `γ − |lhs_g|` per group.
    pub slacks: Vec<f64>,
    /// Per-cell positive probability of the optimal mixture.
    pub probs: Vec<f64>,
    pub always_negative_feasible: bool,
    pub always_positive_feasible: bool,
    pub pivots: usize,
}

/// Minimal surrogate error over all randomized classifiers satisfying `|lhs_g| ≤ γ`.
pub fn enumerate_optimum(
    dist: &CellDistribution,
    regressor: Regressor,
    base: &BaseRates,
    gamma: f64,
    feasibility_tol: f64,
) -> Result<OracleSolution> {
    let n = dist.len();
    if n > MAX_CELLS {
        return Err(Error::TooManyCells {
            cells: n,
            limit: MAX_CELLS,
        });
    }
    if !(gamma >= 0.0) {
        return Err(Error::InvalidConfig(format!("gamma must be >= 0, got {gamma}")));
    }
    let groups = dist.group_count();
    let count = 1usize << n;
    let labeling = |k: usize| -> Vec<f64> { (0..n).map(|i| ((k >> i) & 1) as f64).collect() };

    let columns: Vec<(f64, Vec<f64>)> = (0..count)
        .into_par_iter()
        .map(|k| {
            let probs = labeling(k);
            let err = metrics::surrogate_error(&probs, dist, regressor)?;
            let lhs = metrics::constraint_lhs_all(&probs, dist, regressor, base)?;
            Ok((err, lhs))
        })
        .collect::<Result<_>>()?;

    let feasible = |lhs: &[f64]| lhs.iter().all(|v| v.abs() <= gamma + feasibility_tol);
    let always_negative_feasible = feasible(&columns[0].1);
    let always_positive_feasible = feasible(&columns[count - 1].1);

    // Columns: w_0..w_{count-1}, s⁺_g, s⁻_g.
    let width = count + 2 * groups;
    let rows = 2 * groups + 1;
    let mut a = vec![0.0; rows * width];
    let mut b = vec![gamma; rows];
    for g in 0..groups {
        for (k, (_, lhs)) in columns.iter().enumerate() {
            a[g * width + k] = lhs[g];
            a[(groups + g) * width + k] = -lhs[g];
        }
        a[g * width + count + g] = 1.0;
        a[(groups + g) * width + count + groups + g] = 1.0;
    }
    let last = 2 * groups;
    for k in 0..count {
        a[last * width + k] = 1.0;
    }
    b[last] = 1.0;
    let mut c = vec![0.0; width];
    for (k, (err, _)) in columns.iter().enumerate() {
        c[k] = *err;
    }

    let lp = simplex::solve(&a, &b, &c)?;
    let weights = &lp.x[..count];
    let total: f64 = weights.iter().sum();
    let mut support = Vec::new();
    let mut probs = vec![0.0; n];
    let mut lhs = vec![0.0; groups];
    let mut opt_value = 0.0;
    for (k, &w) in weights.iter().enumerate() {
        if w > 1e-12 {
            let w = w / total;
            let bits = labeling(k);
            for (p, &bit) in probs.iter_mut().zip(&bits) {
                *p += w * bit;
            }
            for (l, &v) in lhs.iter_mut().zip(&columns[k].1) {
                *l += w * v;
            }
            opt_value += w * columns[k].0;
            support.push(SupportEntry {
                labeling: bits.iter().map(|&b| b == 1.0).collect(),
                weight: w,
            });
        }
    }
    let slacks: Vec<f64> = lhs.iter().map(|v| gamma - v.abs()).collect();
    if slacks.iter().any(|&s| s < -feasibility_tol) {
        return Err(Error::Infeasible);
    }
    Ok(OracleSolution {
        notion: base.notion,
        gamma,
        opt_value,
        support,
        lhs,
        slacks,
        probs,
        always_negative_feasible,
        always_positive_feasible,
        pivots: lp.pivots,
    })
}

/// Both pointwise Lagrangian values of one cell and their minimizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointwiseArgmin {
    pub decision: bool,
    pub value_negative: f64,
    pub value_positive: f64,
    pub tie: bool,
}

/// Minimizes the cell's Lagrangian integrand over `{0, 1}`; ties within [`TIE_TOL`] go to 1.
pub fn pointwise_argmin(lambda: &[f64], cell: &Cell, notion: FairnessNotion, base: &BaseRates) -> PointwiseArgmin {
    let s = centered_sum(lambda, &cell.groups, base);
    let (i0, i1) = integrands(s, cell.score, notion);
    let tie = (i1 - i0).abs() <= TIE_TOL;
    PointwiseArgmin {
        decision: tie || i1 < i0,
        value_negative: i0,
        value_positive: i1,
        tie,
    }
}

/// `min_h L(h, λ)`, a lower bound on the optimum for every `λ` in the ball.
pub fn dual_lower_bound(
    dist: &CellDistribution,
    regressor: Regressor,
    base: &BaseRates,
    gamma: f64,
    dual: &DualState,
) -> Result<f64> {
    let f = metrics::regressor_values(dist, regressor)?;
    let lambda = dual.signed();
    let body: f64 = dist
        .cells()
        .iter()
        .zip(&f)
        .map(|(c, &fv)| {
            let (i0, i1) = integrands(centered_sum(&lambda, &c.groups, base), fv, base.notion);
            c.mass * i0.min(i1)
        })
        .sum();
    Ok(body - gamma * dual.l1())
}
