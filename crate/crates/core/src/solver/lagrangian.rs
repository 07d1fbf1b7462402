//! The Lagrangian of the constrained problem, in definition and expanded form.

use crate::error::{Error, Result};
use crate::metrics::{self, Regressor};
use crate::model::{BaseRates, CellDistribution, FairnessNotion};

use super::response::centered_sum;
use super::DualState;

/// Agreement required between the two forms.
pub const FORM_TOLERANCE: f64 = 1e-10;

/// Per-cell Lagrangian integrand at `(p = 0, p = 1)`, excluding the `−γ Σ(λ⁺ + λ⁻)` constant.
///
/// `s` is the centered sum `Σ λ_g (g − β_g)` of the cell.
#[inline]
pub fn integrands(s: f64, f: f64, notion: FairnessNotion) -> (f64, f64) {
    match notion {
        FairnessNotion::Fp => (f, (1.0 - f) * (1.0 + s)),
        FairnessNotion::Fn => (f * (1.0 + s), 1.0 - f),
        FairnessNotion::Err => ((1.0 + s) * f, (1.0 + s) * (1.0 - f)),
        FairnessNotion::Sp => (f, 1.0 - f + s),
    }
}

/// `err̂(h) + Σ_g λ_g⁺(lhs_g − γ) + λ_g⁻(−lhs_g − γ)`.
pub fn lagrangian_value(
    probs: &[f64],
    dual: &DualState,
    dist: &CellDistribution,
    regressor: Regressor,
    base: &BaseRates,
    gamma: f64,
) -> Result<f64> {
    let err = metrics::surrogate_error(probs, dist, regressor)?;
    let lhs = metrics::constraint_lhs_all(probs, dist, regressor, base)?;
    let penalty: f64 = lhs
        .iter()
        .zip(dual.lambda_plus())
        .zip(dual.lambda_minus())
        .map(|((&v, &lp), &lm)| lp * (v - gamma) + lm * (-v - gamma))
        .sum();
    Ok(err + penalty)
}

/// The same quantity as a pointwise expectation of [`integrands`].
pub fn lagrangian_expanded(
    probs: &[f64],
    dual: &DualState,
    dist: &CellDistribution,
    regressor: Regressor,
    base: &BaseRates,
    gamma: f64,
) -> Result<f64> {
    let f = metrics::regressor_values(dist, regressor)?;
    let lambda = dual.signed();
    let body: f64 = dist
        .cells()
        .iter()
        .zip(probs)
        .zip(&f)
        .map(|((c, &p), &fv)| {
            let (i0, i1) = integrands(centered_sum(&lambda, &c.groups, base), fv, base.notion);
            c.mass * ((1.0 - p) * i0 + p * i1)
        })
        .sum();
    Ok(body - gamma * dual.l1())
}

/// Evaluates both forms and fails if they disagree by more than [`FORM_TOLERANCE`].
pub fn lagrangian_checked(
    probs: &[f64],
    dual: &DualState,
    dist: &CellDistribution,
    regressor: Regressor,
    base: &BaseRates,
    gamma: f64,
) -> Result<f64> {
    let definition = lagrangian_value(probs, dual, dist, regressor, base, gamma)?;
    let expanded = lagrangian_expanded(probs, dual, dist, regressor, base, gamma)?;
    if (definition - expanded).abs() > FORM_TOLERANCE {
        return Err(Error::InconsistentLagrangian { definition, expanded });
    }
    Ok(definition)
}
