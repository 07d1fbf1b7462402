//! Seeded synthetic instances with known Bayes scores.
//!
//! Randomness comes from ChaCha8 seeded with `seed_from_u64`, so fixtures
//! reproduce across platforms.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics;
use crate::model::{Cell, CellDistribution, FairnessNotion, GroupMask, GroupSystem, Row};

/// Minimum FP violation of the unconstrained Bayes rule under `TwoGroupBias`.
pub const BIAS_FLOOR: f64 = 0.02;
/// Derived seeds tried before giving up on the bias floor.
pub const MAX_ATTEMPTS: u32 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BiasProfile {
    #[default]
    Uniform,
    /// Members of the first non-trivial group carry higher label means.
    TwoGroupBias,
    /// Heavily overlapping groups whose label mean grows with membership count.
    AdversarialOverlap,
}

impl std::str::FromStr for BiasProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "uniform" => Ok(Self::Uniform),
            "two_group_bias" => Ok(Self::TwoGroupBias),
            "adversarial_overlap" => Ok(Self::AdversarialOverlap),
            other => Err(Error::InvalidConfig(format!("unknown bias profile {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub seed: u64,
    pub n_cells: usize,
    /// Groups besides the all-group `I`.
    pub n_groups: usize,
    pub grid_m: u32,
    pub bias_profile: BiasProfile,
    /// Scores are shifted by up to this much (uniformly) before re-gridding.
    pub miscalibration: f64,
}

impl SynthSpec {
    pub fn new(seed: u64, n_cells: usize, n_groups: usize, grid_m: u32, bias_profile: BiasProfile) -> Self {
        Self {
            seed,
            n_cells,
            n_groups,
            grid_m,
            bias_profile,
            miscalibration: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_cells == 0 {
            return Err(Error::InvalidConfig("n_cells must be at least 1".into()));
        }
        if self.grid_m < 2 {
            return Err(Error::InvalidConfig("grid_m must be at least 2".into()));
        }
        if !(self.miscalibration >= 0.0) || !self.miscalibration.is_finite() {
            return Err(Error::InvalidConfig("miscalibration must be finite and >= 0".into()));
        }
        if self.bias_profile == BiasProfile::TwoGroupBias && self.n_groups == 0 {
            return Err(Error::InvalidConfig("two_group_bias needs at least one group".into()));
        }
        let keys = (self.grid_m as u128 - 1) << self.n_groups.min(100);
        if (self.n_cells as u128) > keys {
            return Err(Error::InvalidConfig(format!(
                "{} cells do not fit in {keys} distinct (score, groups) keys",
                self.n_cells
            )));
        }
        Ok(())
    }
}

/// A generated instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    /// Scores equal the label means.
    pub truth: CellDistribution,
    /// Same cells with perturbed scores; label means unchanged.
    pub perturbed: CellDistribution,
    /// Seed that produced the accepted draw.
    pub effective_seed: u64,
}

fn derived_seed(seed: u64, attempt: u32) -> u64 {
    if attempt == 0 {
        seed
    } else {
        seed.wrapping_add((attempt as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
    }
}

/// Generates an instance; a pure function of `spec`.
pub fn gen_instance(spec: &SynthSpec) -> Result<Instance> {
    spec.validate()?;
    for attempt in 0..MAX_ATTEMPTS {
        let seed = derived_seed(spec.seed, attempt);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth = draw_truth(spec, &mut rng)?;
        if spec.bias_profile == BiasProfile::TwoGroupBias && bayes_fp_violation(&truth)? <= BIAS_FLOOR {
            continue;
        }
        let perturbed = perturb(&truth, spec.miscalibration, &mut rng)?;
        return Ok(Instance {
            truth,
            perturbed,
            effective_seed: seed,
        });
    }
    Err(Error::BiasFloorUnmet { attempts: MAX_ATTEMPTS })
}

/// Max FP violation of `1[q ≥ ½]` against the label means.
pub fn bayes_fp_violation(dist: &CellDistribution) -> Result<f64> {
    let q = dist.label_means()?;
    let probs: Vec<f64> = q.iter().map(|&v| if v >= 0.5 { 1.0 } else { 0.0 }).collect();
    Ok(metrics::true_rates(&probs, dist, FairnessNotion::Fp)?.max_violation)
}

fn group_system(n_groups: usize) -> Result<GroupSystem> {
    GroupSystem::with_all_group((0..n_groups).map(|i| ((b'a' + (i % 26) as u8) as char).to_string() + &suffix(i)))
}

fn suffix(i: usize) -> String {
    if i < 26 {
        String::new()
    } else {
        (i / 26).to_string()
    }
}

fn draw_mask<R: Rng>(rng: &mut R, n_groups: usize, p: f64) -> GroupMask {
    let mut bits = vec![true];
    bits.extend((0..n_groups).map(|_| rng.random_bool(p)));
    GroupMask::from_bools(&bits)
}

fn draw_level<R: Rng>(rng: &mut R, m: u32, lo: f64, hi: f64) -> u32 {
    let lo = ((lo * m as f64).ceil() as u32).clamp(1, m - 1);
    let hi = ((hi * m as f64).floor() as u32).clamp(lo, m - 1);
    rng.random_range(lo..=hi)
}

fn draw_truth<R: Rng>(spec: &SynthSpec, rng: &mut R) -> Result<CellDistribution> {
    let m = spec.grid_m;
    let groups = group_system(spec.n_groups)?;
    let overlap = spec.bias_profile == BiasProfile::AdversarialOverlap;
    let membership = if overlap { 0.75 } else { 0.5 };

    let mut keys = HashSet::new();
    let mut cells = Vec::with_capacity(spec.n_cells);
    let mut guard = 0usize;
    while cells.len() < spec.n_cells {
        guard += 1;
        if guard > 1000 * spec.n_cells + 10_000 {
            return Err(Error::InvalidConfig("could not draw enough distinct cells".into()));
        }
        let mask = draw_mask(rng, spec.n_groups, membership);
        let level = match spec.bias_profile {
            BiasProfile::Uniform => draw_level(rng, m, 0.0, 1.0),
            BiasProfile::TwoGroupBias if mask.get(1) => draw_level(rng, m, 0.4, 1.0),
            BiasProfile::TwoGroupBias => draw_level(rng, m, 0.0, 0.6),
            BiasProfile::AdversarialOverlap => {
                let share = (mask.members().len() - 1) as f64 / spec.n_groups.max(1) as f64;
                let centre = 0.2 + 0.6 * share;
                draw_level(rng, m, centre - 0.15, centre + 0.15)
            }
        };
        if !keys.insert((level, mask.clone())) {
            continue;
        }
        let mass = rng.random_range(0.5..1.5);
        cells.push((level, mask, mass));
    }
    let total: f64 = cells.iter().map(|c| c.2).sum();
    let cells = cells
        .into_iter()
        .map(|(level, mask, mass)| Cell::new(level, m, mask, mass / total, Some(level as f64 / m as f64)))
        .collect();
    CellDistribution::new(m, groups, cells)
}

fn perturb<R: Rng>(truth: &CellDistribution, magnitude: f64, rng: &mut R) -> Result<CellDistribution> {
    if magnitude == 0.0 {
        return Ok(truth.clone());
    }
    let m = truth.grid_m();
    let mut taken: HashSet<(u32, GroupMask)> = HashSet::new();
    let mut out: Vec<Cell> = Vec::with_capacity(truth.len());
    for c in truth.cells() {
        let shifted = (c.score + magnitude * rng.random_range(-1.0..=1.0)).clamp(0.0, 1.0);
        let target = crate::model::snap_to_grid(shifted, m);
        // nearest free level, stepping ±1/m outward
        let free = (0..=m)
            .flat_map(|d| [target as i64 - d as i64, target as i64 + d as i64])
            .find(|&l| (0..=m as i64).contains(&l) && !taken.contains(&(l as u32, c.groups.clone())));
        match free {
            Some(l) => {
                taken.insert((l as u32, c.groups.clone()));
                out.push(Cell::new(l as u32, m, c.groups.clone(), c.mass, c.label_mean));
            }
            None => {
                // every level of this mask is occupied: merge into the target cell
                let existing = out
                    .iter_mut()
                    .find(|o| o.level == target && o.groups == c.groups)
                    .expect("occupied key has a cell");
                let total = existing.mass + c.mass;
                let q =
                    (existing.mass * existing.label_mean.unwrap_or(0.0) + c.mass * c.label_mean.unwrap_or(0.0)) / total;
                existing.mass = total;
                existing.label_mean = Some(q);
            }
        }
    }
    CellDistribution::new(m, truth.groups().clone(), out)
}

/// Draws `n` labelled rows i.i.d. from `dist`; labels are Bernoulli(label_mean).
pub fn sample_rows(dist: &CellDistribution, n: usize, seed: u64) -> Result<Vec<Row>> {
    let q = dist.label_means()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cumulative = Vec::with_capacity(dist.len());
    let mut acc = 0.0;
    for c in dist.cells() {
        acc += c.mass;
        cumulative.push(acc);
    }
    Ok((0..n)
        .map(|_| {
            let u = rng.random_range(0.0..acc);
            let i = cumulative.partition_point(|&x| x <= u).min(dist.len() - 1);
            let c = &dist.cells()[i];
            Row {
                score: c.score,
                groups: c.groups.clone(),
                label: Some(if rng.random_bool(q[i].clamp(0.0, 1.0)) {
                    1.0
                } else {
                    0.0
                }),
            }
        })
        .collect())
}
