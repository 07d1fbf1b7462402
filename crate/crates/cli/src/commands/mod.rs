//! Subcommand implementations.

pub mod audit;
pub mod calibrate;
pub mod eval;
pub mod solve;
pub mod sweep;
pub mod synth;

use std::sync::Arc;

use fairpost_core::metrics;
use fairpost_core::multical::{CheckFunction, Hypothesis};
use fairpost_core::{BetaMode, CellDistribution, FairnessNotion, MixtureClassifier};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::CliResult;

/// Cap on mixture rules reused as checks.
pub const MAX_SNAPSHOTS: usize = 32;
pub const DEFAULT_RANDOM_CHECKS: usize = 64;

/// At most `limit` rules, evenly spaced through the mixture.
pub fn snapshots(mixture: &MixtureClassifier, limit: usize) -> Vec<usize> {
    let n = mixture.len();
    if n <= limit {
        return (0..n).collect();
    }
    let mut idx: Vec<usize> = (0..limit).map(|i| i * n / limit).collect();
    idx.dedup();
    idx
}

/// A point drawn uniformly from the L1 ball of radius `c` in `dim` dimensions.
pub fn random_l1_point(rng: &mut ChaCha8Rng, dim: usize, c: f64) -> Vec<f64> {
    // Uniform on the simplex in dim + 1 coordinates, one coordinate dropped, random signs.
    let e: Vec<f64> = (0..=dim).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = e.iter().sum();
    e[..dim]
        .iter()
        .map(|x| {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            sign * c * x / total
        })
        .collect()
}

/// Settings for the default check family.
pub struct CheckSpec<'a> {
    pub notion: FairnessNotion,
    pub beta_mode: BetaMode,
    pub bound: f64,
    pub random: usize,
    pub seed: u64,
    pub mixture: Option<&'a MixtureClassifier>,
}

/// Groups, then `K` random thresholds, then group × rule products and rule thresholds
/// for each mixture snapshot.
pub fn default_checks(dist: &CellDistribution, spec: &CheckSpec) -> CliResult<Vec<CheckFunction>> {
    let groups = dist.group_count();
    let mut checks: Vec<CheckFunction> = (0..groups).map(CheckFunction::Group).collect();
    if spec.random > 0 {
        let base = Arc::new(metrics::base_rates(dist, spec.notion, spec.beta_mode)?);
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        for _ in 0..spec.random {
            checks.push(CheckFunction::Threshold {
                lambda: random_l1_point(&mut rng, groups, spec.bound),
                notion: spec.notion,
                base: base.clone(),
            });
        }
    }
    if let Some(mixture) = spec.mixture {
        for i in snapshots(mixture, MAX_SNAPSHOTS) {
            let rule = &mixture.rules()[i];
            for g in 0..groups {
                checks.push(CheckFunction::Product(g, Hypothesis::Rule(rule.clone())));
            }
            checks.push(CheckFunction::Threshold {
                lambda: rule.lambda.clone(),
                notion: rule.notion,
                base: rule.base.clone(),
            });
        }
    }
    Ok(checks)
}
