//! Error rates, group rates, base-rate constants and constraint left-hand sides.
//!
//! Classifiers enter as per-cell positive probabilities `p` aligned with
//! `dist.cells()`. Every expectation is an exact mass-weighted sum over cells.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BaseRates, CellDistribution, FairnessNotion};

/// Which per-cell quantity plays the regression function `f`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regressor {
    /// The cell score (the surrogate `f̂`).
    Scores,
    /// The cell label mean (the Bayes regressor `f*`).
    LabelMean,
}

/// How base rates are estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BetaMode {
    #[default]
    FromScores,
    FromLabels,
}

impl BetaMode {
    pub fn regressor(self) -> Regressor {
        match self {
            BetaMode::FromScores => Regressor::Scores,
            BetaMode::FromLabels => Regressor::LabelMean,
        }
    }
}

/// Per-cell values of `f` for the chosen regressor.
pub fn regressor_values(dist: &CellDistribution, regressor: Regressor) -> Result<Vec<f64>> {
    match regressor {
        Regressor::Scores => Ok(dist.cells().iter().map(|c| c.score).collect()),
        Regressor::LabelMean => dist.label_means(),
    }
}

/// Base-rate constants and slack weights for `notion`.
pub fn base_rates(dist: &CellDistribution, notion: FairnessNotion, mode: BetaMode) -> Result<BaseRates> {
    let f = regressor_values(dist, mode.regressor())?;
    let groups = dist.group_count();
    let cells = dist.cells();

    // Per cell, the weight defining the conditioning event: 1−q for FP, q for FN, 1 otherwise.
    let cond = |i: usize| match notion {
        FairnessNotion::Fp => 1.0 - f[i],
        FairnessNotion::Fn => f[i],
        FairnessNotion::Err | FairnessNotion::Sp => 1.0,
    };
    let total: f64 = cells.iter().enumerate().map(|(i, c)| c.mass * cond(i)).sum();
    if total <= 0.0 {
        let what = match notion {
            FairnessNotion::Fp => "E[1 - q] = 0 (all-positive population)",
            FairnessNotion::Fn => "E[q] = 0 (all-negative population)",
            _ => "zero total mass",
        };
        return Err(Error::DegenerateLabelMarginal(what.into()));
    }
    let mut w = vec![0.0; groups];
    for (i, c) in cells.iter().enumerate() {
        let weight = c.mass * cond(i);
        for (g, wg) in w.iter_mut().enumerate() {
            if c.in_group(g) {
                *wg += weight;
            }
        }
    }
    let beta = w.iter().map(|&wg| (wg / total).clamp(0.0, 1.0)).collect();
    Ok(BaseRates { notion, beta, w })
}

/// The per-cell integrand `u(p, f)` whose expectation is the notion's rate.
///
/// FP: `p(1−f)`, FN: `(1−p)f`, ERR: `(1−p)f + p(1−f)`, SP: `p`.
#[inline]
pub fn rate_term(notion: FairnessNotion, p: f64, f: f64) -> f64 {
    match notion {
        FairnessNotion::Fp => p * (1.0 - f),
        FairnessNotion::Fn => (1.0 - p) * f,
        FairnessNotion::Err => (1.0 - p) * f + p * (1.0 - f),
        FairnessNotion::Sp => p,
    }
}

/// Surrogate error `E[f(1−p) + (1−f)p]`.
pub fn surrogate_error(probs: &[f64], dist: &CellDistribution, regressor: Regressor) -> Result<f64> {
    let f = regressor_values(dist, regressor)?;
    Ok(dist
        .cells()
        .iter()
        .zip(probs)
        .zip(&f)
        .map(|((c, &p), &fv)| c.mass * rate_term(FairnessNotion::Err, p, fv))
        .sum())
}

/// `E[u(p, f) · g]`, or the group-free aggregate `E[u(p, f)]` when `group` is `None`.
pub fn surrogate_group_rate(
    probs: &[f64],
    group: Option<usize>,
    dist: &CellDistribution,
    regressor: Regressor,
    notion: FairnessNotion,
) -> Result<f64> {
    let f = regressor_values(dist, regressor)?;
    Ok(group_rate_with(probs, group, dist, &f, notion))
}

fn group_rate_with(
    probs: &[f64],
    group: Option<usize>,
    dist: &CellDistribution,
    f: &[f64],
    notion: FairnessNotion,
) -> f64 {
    assert_eq!(probs.len(), dist.len(), "probability vector does not match the cells");
    dist.cells()
        .iter()
        .zip(probs)
        .zip(f)
        .filter(|((c, _), _)| group.is_none_or(|g| c.in_group(g)))
        .map(|((c, &p), &fv)| c.mass * rate_term(notion, p, fv))
        .sum()
}

/// Signed constraint value `ρ̂_g − β_g ρ̂₀` for group `g`.
pub fn constraint_lhs(
    probs: &[f64],
    group: usize,
    dist: &CellDistribution,
    regressor: Regressor,
    base: &BaseRates,
) -> Result<f64> {
    let f = regressor_values(dist, regressor)?;
    let rho_g = group_rate_with(probs, Some(group), dist, &f, base.notion);
    let rho_0 = group_rate_with(probs, None, dist, &f, base.notion);
    Ok(rho_g - base.beta[group] * rho_0)
}

/// `constraint_lhs` for every group, sharing one pass over the cells.
pub fn constraint_lhs_all(
    probs: &[f64],
    dist: &CellDistribution,
    regressor: Regressor,
    base: &BaseRates,
) -> Result<Vec<f64>> {
    let f = regressor_values(dist, regressor)?;
    Ok(lhs_from_values(probs, dist, &f, base))
}

pub(crate) fn lhs_from_values(probs: &[f64], dist: &CellDistribution, f: &[f64], base: &BaseRates) -> Vec<f64> {
    let masses: Vec<f64> = dist.cells().iter().map(|c| c.mass).collect();
    let (rho, rho_0) = group_rates(probs, &masses, dist, f, base.notion);
    rho.iter().zip(&base.beta).map(|(&r, &b)| r - b * rho_0).collect()
}

/// `(E[u·g] for each g, E[u])` under the given cell masses.
pub(crate) fn group_rates(
    probs: &[f64],
    masses: &[f64],
    dist: &CellDistribution,
    f: &[f64],
    notion: FairnessNotion,
) -> (Vec<f64>, f64) {
    let mut rho = vec![0.0; dist.group_count()];
    let mut rho_0 = 0.0;
    for (((c, &p), &fv), &mass) in dist.cells().iter().zip(probs).zip(f).zip(masses) {
        let u = mass * rate_term(notion, p, fv);
        rho_0 += u;
        for (g, r) in rho.iter_mut().enumerate() {
            if c.in_group(g) {
                *r += u;
            }
        }
    }
    (rho, rho_0)
}

/// Exact rates of a (randomized) classifier measured against the label means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub notion: FairnessNotion,
    pub err: f64,
    pub rho_overall: f64,
    pub rho_by_group: Vec<f64>,
    /// Conditioning mass `w_g` of each group.
    pub weight_by_group: Vec<f64>,
    pub violation_by_group: Vec<f64>,
    pub max_violation: f64,
    /// Groups whose conditioning event has zero mass; their rate is reported as 0.
    pub degenerate_groups: Vec<usize>,
}

/// True error and `w_g |ρ_g − ρ|` for every group, using `label_mean` as `f*`.
pub fn true_rates(probs: &[f64], dist: &CellDistribution, notion: FairnessNotion) -> Result<RateReport> {
    let q = dist.label_means()?;
    let cells = dist.cells();
    let groups = dist.group_count();

    let err: f64 = cells
        .iter()
        .zip(probs)
        .zip(&q)
        .map(|((c, &p), &qv)| c.mass * (qv * (1.0 - p) + (1.0 - qv) * p))
        .sum();

    // numerator: Pr[event, condition]; denominator: Pr[condition].
    let event_and_cond = |p: f64, qv: f64| -> (f64, f64) {
        match notion {
            FairnessNotion::Fp => (p * (1.0 - qv), 1.0 - qv),
            FairnessNotion::Fn => ((1.0 - p) * qv, qv),
            FairnessNotion::Err => ((1.0 - p) * qv + p * (1.0 - qv), 1.0),
            FairnessNotion::Sp => (p, 1.0),
        }
    };

    let mut num = vec![0.0; groups];
    let mut den = vec![0.0; groups];
    let (mut num_all, mut den_all) = (0.0, 0.0);
    for ((c, &p), &qv) in cells.iter().zip(probs).zip(&q) {
        let (e, k) = event_and_cond(p, qv);
        num_all += c.mass * e;
        den_all += c.mass * k;
        for g in 0..groups {
            if c.in_group(g) {
                num[g] += c.mass * e;
                den[g] += c.mass * k;
            }
        }
    }
    let rho_overall = if den_all > 0.0 { num_all / den_all } else { 0.0 };
    let mut degenerate_groups = Vec::new();
    let rho_by_group: Vec<f64> = (0..groups)
        .map(|g| {
            if den[g] > 0.0 {
                num[g] / den[g]
            } else {
                degenerate_groups.push(g);
                0.0
            }
        })
        .collect();
    let violation_by_group: Vec<f64> = (0..groups)
        .map(|g| {
            if den[g] > 0.0 {
                den[g] * (rho_by_group[g] - rho_overall).abs()
            } else {
                0.0
            }
        })
        .collect();
    let max_violation = violation_by_group.iter().copied().fold(0.0, f64::max);
    Ok(RateReport {
        notion,
        err,
        rho_overall,
        rho_by_group,
        weight_by_group: den,
        violation_by_group,
        max_violation,
        degenerate_groups,
    })
}
