//! Closed-form best responses of the primal player.

use crate::model::{BaseRates, FairnessNotion, GroupMask};

/// `S = Σ_g λ_g (g(x) − β_g)`, the dual-weighted centered group membership.
pub fn centered_sum(lambda: &[f64], groups: &GroupMask, base: &BaseRates) -> f64 {
    debug_assert_eq!(lambda.len(), base.beta.len());
    lambda
        .iter()
        .zip(&base.beta)
        .enumerate()
        .map(|(g, (&l, &b))| {
            let indicator = if groups.get(g) { 1.0 } else { 0.0 };
            l * (indicator - b)
        })
        .sum()
}

/// Pointwise minimizer of the Lagrangian over `{0, 1}` with ties broken to 1.
pub fn best_response(lambda: &[f64], groups: &GroupMask, score: f64, notion: FairnessNotion, base: &BaseRates) -> bool {
    best_response_with_tiebreak(lambda, groups, score, notion, base, true)
}

/// [`best_response`] with an explicit value for exact ties between the score and the threshold.
pub fn best_response_with_tiebreak(
    lambda: &[f64],
    groups: &GroupMask,
    score: f64,
    notion: FairnessNotion,
    base: &BaseRates,
    tie: bool,
) -> bool {
    let s = centered_sum(lambda, groups, base);
    respond(s, score, notion, tie)
}

/// Decision given the centered sum `s` and score `f`.
pub fn respond(s: f64, f: f64, notion: FairnessNotion, tie: bool) -> bool {
    match notion {
        FairnessNotion::Fp => {
            let denom = 2.0 + s;
            if denom == 0.0 {
                true
            } else {
                let threshold = (1.0 + s) / denom;
                signed_threshold(f, threshold, denom > 0.0, tie)
            }
        }
        FairnessNotion::Fn => {
            let denom = 2.0 + s;
            if denom == 0.0 {
                false
            } else {
                signed_threshold(f, 1.0 / denom, denom > 0.0, tie)
            }
        }
        FairnessNotion::Err => {
            let denom = 2.0 + 2.0 * s;
            if denom == 0.0 {
                true
            } else {
                let threshold = (1.0 + s) / denom;
                signed_threshold(f, threshold, denom > 0.0, tie)
            }
        }
        FairnessNotion::Sp => signed_threshold(f, 0.5 + 0.5 * s, true, tie),
    }
}

/// Positive denominator: predict 1 above the threshold. Negative: below it.
fn signed_threshold(f: f64, threshold: f64, positive: bool, tie: bool) -> bool {
    if f == threshold {
        tie
    } else if positive {
        f > threshold
    } else {
        f < threshold
    }
}
