//! Projection of the stacked dual vector onto the nonnegative L1 ball.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionMode {
    /// Euclidean projection (sort and soft-threshold).
    #[default]
    #[serde(alias = "euclidean_l1")]
    Euclidean,
    /// Uniform rescaling by `C / ‖λ‖₁` when outside the ball.
    Rescale,
}

/// Projects nonnegative `v` onto `{x ≥ 0 : Σx ≤ radius}` in place.
pub fn project_l1(v: &mut [f64], radius: f64, mode: ProjectionMode) {
    debug_assert!(v.iter().all(|&x| x >= 0.0));
    let norm: f64 = v.iter().sum();
    if norm <= radius {
        return;
    }
    match mode {
        ProjectionMode::Rescale => {
            let scale = radius / norm;
            v.iter_mut().for_each(|x| *x *= scale);
        }
        ProjectionMode::Euclidean => {
            let theta = simplex_shift(v, radius);
            v.iter_mut().for_each(|x| *x = (*x - theta).max(0.0));
        }
    }
}

/// The shift `θ ≥ 0` with `Σ max(0, v_i − θ) = radius`, assuming `Σv > radius`.
fn simplex_shift(v: &[f64], radius: f64) -> f64 {
    let mut sorted = v.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - radius) / (k + 1) as f64;
        if u > candidate {
            theta = candidate;
        } else {
            break;
        }
    }
    theta.max(0.0)
}
