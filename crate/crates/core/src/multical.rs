//! Joint multicalibration: the thresholding checks `s_λ(x, v)`, auditing and
//! the patching loop driven by the Brier potential.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{snap_to_grid, BaseRates, Cell, CellDistribution, FairnessNotion, GroupMask, ThresholdRule};
use crate::solver::response::centered_sum;

/// Threshold function `d(v)` of the notion; singular points map to `+∞`.
pub fn d_of_v(notion: FairnessNotion, v: f64) -> f64 {
    match notion {
        FairnessNotion::Fp if v == 1.0 => f64::INFINITY,
        FairnessNotion::Fp => (2.0 * v - 1.0) / (1.0 - v),
        FairnessNotion::Fn if v == 0.0 => f64::INFINITY,
        FairnessNotion::Fn => (1.0 - 2.0 * v) / v,
        FairnessNotion::Err if v == 0.5 => f64::INFINITY,
        FairnessNotion::Err => (2.0 * v - 1.0) / (1.0 - 2.0 * v),
        FairnessNotion::Sp => 2.0 * v - 1.0,
    }
}

/// `s_λ(x, v) = 1[⟨λ, x_G − β⟩ ≥ d(v)]`.
pub fn threshold_eval(lambda: &[f64], base: &BaseRates, groups: &GroupMask, v: f64, notion: FairnessNotion) -> bool {
    centered_sum(lambda, groups, base) >= d_of_v(notion, v)
}

/// A deterministic classifier used inside checks.
#[derive(Debug, Clone, PartialEq)]
pub enum Hypothesis {
    Constant(bool),
    Rule(ThresholdRule),
}

impl Hypothesis {
    pub fn eval(&self, cell: &Cell) -> bool {
        match self {
            Hypothesis::Constant(b) => *b,
            Hypothesis::Rule(r) => r.decide(cell),
        }
    }
}

/// A check `c(x, v) ∈ {0, 1}`. Only `Threshold` depends on `v`.
#[derive(Debug, Clone, PartialEq)]
pub enum CheckFunction {
    Group(usize),
    Hypothesis(Hypothesis),
    Product(usize, Hypothesis),
    Threshold {
        lambda: Vec<f64>,
        notion: FairnessNotion,
        base: Arc<BaseRates>,
    },
}

impl CheckFunction {
    pub fn eval(&self, cell: &Cell, v: f64) -> bool {
        match self {
            CheckFunction::Group(g) => cell.in_group(*g),
            CheckFunction::Hypothesis(h) => h.eval(cell),
            CheckFunction::Product(g, h) => cell.in_group(*g) && h.eval(cell),
            CheckFunction::Threshold { lambda, notion, base } => threshold_eval(lambda, base, &cell.groups, v, *notion),
        }
    }

    /// Short human-readable description.
    pub fn describe(&self) -> String {
        match self {
            CheckFunction::Group(g) => format!("group:{g}"),
            CheckFunction::Hypothesis(Hypothesis::Constant(b)) => format!("const:{}", *b as u8),
            CheckFunction::Hypothesis(Hypothesis::Rule(_)) => "rule".into(),
            CheckFunction::Product(g, Hypothesis::Constant(b)) => format!("group:{g}*const:{}", *b as u8),
            CheckFunction::Product(g, Hypothesis::Rule(_)) => format!("group:{g}*rule"),
            CheckFunction::Threshold { notion, .. } => format!("threshold:{notion}"),
        }
    }
}

/// Calibration grid `m = 1/α`, rounded when `1/α` is an integer up to float noise.
pub fn grid_for_alpha(alpha: f64) -> u32 {
    let inv = 1.0 / alpha;
    if (inv - inv.round()).abs() < 1e-9 {
        inv.round() as u32
    } else {
        inv.ceil() as u32
    }
}

/// `B(f) = E[(y − f)²]` with `y ~ Bernoulli(label_mean)`.
pub fn brier(values: &[f64], dist: &CellDistribution) -> Result<f64> {
    let q = dist.label_means()?;
    Ok(dist
        .cells()
        .iter()
        .zip(values)
        .zip(&q)
        .map(|((c, &f), &qv)| c.mass * (qv * (1.0 - f).powi(2) + (1.0 - qv) * f * f))
        .sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub per_check: Vec<f64>,
    pub max: f64,
}

/// `Σ_v Pr[f = v, c(x, v) = 1] · |v − E[y | f = v, c = 1]|` for each check.
pub fn audit(values: &[f64], checks: &[CheckFunction], dist: &CellDistribution) -> Result<AuditReport> {
    let q = dist.label_means()?;
    assert_eq!(values.len(), dist.len(), "assignment does not match the cells");
    let per_check: Vec<f64> = checks
        .par_iter()
        .map(|check| {
            // level set -> (mass, Σ mass·q); keyed by bit pattern so every distinct value is its own set
            let mut sets: BTreeMap<u64, (f64, f64, f64)> = BTreeMap::new();
            for ((c, &v), &qv) in dist.cells().iter().zip(values).zip(&q) {
                if check.eval(c, v) {
                    let e = sets.entry(v.to_bits()).or_insert((v, 0.0, 0.0));
                    e.1 += c.mass;
                    e.2 += c.mass * qv;
                }
            }
            sets.values().map(|&(v, m, mq)| (m * v - mq).abs()).sum()
        })
        .collect();
    let max = per_check.iter().copied().fold(0.0, f64::max);
    Ok(AuditReport { per_check, max })
}

/// Squared-form violation `Σ_v Pr[f = v, c = 1] (v − E[y | f = v, c = 1])²` of one check.
pub fn squared_violation(values: &[f64], check: &CheckFunction, dist: &CellDistribution) -> Result<f64> {
    let q = dist.label_means()?;
    let mut sets: BTreeMap<u64, (f64, f64, f64)> = BTreeMap::new();
    for ((c, &v), &qv) in dist.cells().iter().zip(values).zip(&q) {
        if check.eval(c, v) {
            let e = sets.entry(v.to_bits()).or_insert((v, 0.0, 0.0));
            e.1 += c.mass;
            e.2 += c.mass * qv;
        }
    }
    Ok(sets
        .values()
        .filter(|e| e.1 > 0.0)
        .map(|&(v, m, mq)| (m * v - mq).powi(2) / m)
        .sum())
}

/// A score function on the calibration grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationState {
    pub grid_m: u32,
    /// Grid level of each cell, aligned with `dist.cells()`.
    pub levels: Vec<u32>,
    pub round: u64,
    pub potential: f64,
}

impl CalibrationState {
    pub fn values(&self) -> Vec<f64> {
        self.levels.iter().map(|&k| k as f64 / self.grid_m as f64).collect()
    }
}

/// One accepted patch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchRecord {
    pub round: u64,
    pub check: usize,
    /// Level `v_t` of the patched set.
    pub level: f64,
    pub set_mass: f64,
    /// `E[y | x ∈ S_t]`.
    pub v_tilde: f64,
    /// `Round(ṽ_t, m)`.
    pub v_new: f64,
    pub potential_before: f64,
    pub potential_after: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub alpha: f64,
    pub initial: CalibrationState,
    pub state: CalibrationState,
    pub history: Vec<PatchRecord>,
}

impl Calibration {
    /// Round bound `4/α²`.
    pub fn round_bound(&self) -> f64 {
        4.0 / (self.alpha * self.alpha)
    }
}

/// Patches `initial` (one value per cell) until every check's squared violation is below `alpha`.
pub fn calibrate(
    initial: &[f64],
    checks: &[CheckFunction],
    dist: &CellDistribution,
    alpha: f64,
) -> Result<Calibration> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidConfig(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if initial.len() != dist.len() {
        return Err(Error::InvalidConfig(format!(
            "initial assignment has {} values for {} cells",
            initial.len(),
            dist.len()
        )));
    }
    let q = dist.label_means()?;
    let m = grid_for_alpha(alpha);
    let levels: Vec<u32> = initial.iter().map(|&v| snap_to_grid(v, m)).collect();
    let value = |k: u32| k as f64 / m as f64;

    let potential = |levels: &[u32]| -> f64 {
        dist.cells()
            .iter()
            .zip(levels)
            .zip(&q)
            .map(|((c, &k), &qv)| {
                let f = value(k);
                c.mass * (qv * (1.0 - f).powi(2) + (1.0 - qv) * f * f)
            })
            .sum()
    };

    let mut state = CalibrationState {
        grid_m: m,
        potential: potential(&levels),
        levels,
        round: 0,
    };
    let initial_state = state.clone();
    let mut history = Vec::new();
    let max_rounds = (4.0 / (alpha * alpha)).floor() as u64 + 1;
    let levels_count = m as usize + 1;

    loop {
        // stats[check][level] = (mass, Σ mass·q)
        let stats: Vec<Vec<(f64, f64)>> = checks
            .par_iter()
            .map(|check| {
                let mut s = vec![(0.0, 0.0); levels_count];
                for ((c, &k), &qv) in dist.cells().iter().zip(&state.levels).zip(&q) {
                    if check.eval(c, value(k)) {
                        s[k as usize].0 += c.mass;
                        s[k as usize].1 += c.mass * qv;
                    }
                }
                s
            })
            .collect();
        let term = |mass: f64, mq: f64, k: usize| -> f64 {
            if mass > 0.0 {
                (mass * value(k as u32) - mq).powi(2) / mass
            } else {
                0.0
            }
        };
        let violated = stats
            .iter()
            .any(|s| s.iter().enumerate().map(|(k, &(ms, mq))| term(ms, mq, k)).sum::<f64>() >= alpha);
        if !violated {
            break;
        }
        if state.round >= max_rounds {
            return Err(Error::NonTermination { rounds: state.round });
        }

        // argmax over (v, c): lowest v first, then check order
        let mut best = (f64::NEG_INFINITY, 0usize, 0usize);
        for k in 0..levels_count {
            for (ci, s) in stats.iter().enumerate() {
                let t = term(s[k].0, s[k].1, k);
                if t > best.0 {
                    best = (t, k, ci);
                }
            }
        }
        let (_, k, ci) = best;
        let (set_mass, set_mq) = stats[ci][k];
        let v_tilde = set_mq / set_mass;
        let new_level = snap_to_grid(v_tilde, m);
        let v = value(k as u32);
        for (c, level) in dist.cells().iter().zip(state.levels.iter_mut()) {
            if *level as usize == k && checks[ci].eval(c, v) {
                *level = new_level;
            }
        }
        let before = state.potential;
        state.potential = potential(&state.levels);
        state.round += 1;
        history.push(PatchRecord {
            round: state.round,
            check: ci,
            level: v,
            set_mass,
            v_tilde,
            v_new: value(new_level),
            potential_before: before,
            potential_after: state.potential,
        });
    }

    Ok(Calibration {
        alpha,
        initial: initial_state,
        state,
        history,
    })
}
