#![allow(dead_code)]

use std::collections::HashSet;

use fairpost_core::{Cell, CellDistribution, GroupMask, GroupSystem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random labelled distribution with the all-group at index 0.
///
/// Label means are independent of scores and continuous.
pub fn random_instance(seed: u64, max_cells: usize, max_groups: usize) -> CellDistribution {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.random_range(4..=20u32);
    let extra = rng.random_range(1..=max_groups);
    let target = rng.random_range(2..=max_cells);
    let gs = GroupSystem::with_all_group((0..extra).map(|i| format!("g{i}"))).unwrap();
    let mut keys = HashSet::new();
    let mut raw = Vec::new();
    for _ in 0..target * 20 {
        if raw.len() == target {
            break;
        }
        let mut bits = vec![true];
        bits.extend((0..extra).map(|_| rng.random_bool(0.5)));
        let mask = GroupMask::from_bools(&bits);
        // the first cell is interior so no base-rate marginal degenerates
        let level = if raw.is_empty() {
            rng.random_range(1..m)
        } else {
            rng.random_range(0..=m)
        };
        if keys.insert((level, mask.clone())) {
            let q: f64 = rng.random_range(0.02..0.98);
            raw.push((level, mask, rng.random_range(0.1..1.0), q));
        }
    }
    let total: f64 = raw.iter().map(|r| r.2).sum();
    let cells = raw
        .into_iter()
        .map(|(l, mask, w, q)| Cell::new(l, m, mask, w / total, Some(q)))
        .collect();
    CellDistribution::new(m, gs, cells).unwrap()
}

/// Same as [`random_instance`] but with scores equal to label means snapped to the grid.
pub fn calibrated_instance(seed: u64, max_cells: usize, max_groups: usize) -> CellDistribution {
    let d = random_instance(seed, max_cells, max_groups);
    let cells = d
        .cells()
        .iter()
        .map(|c| Cell::new(c.level, d.grid_m(), c.groups.clone(), c.mass, Some(c.score)))
        .collect();
    CellDistribution::new(d.grid_m(), d.groups().clone(), cells).unwrap()
}

/// Random deterministic classifier on the cells.
pub fn random_labeling(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xA5A5);
    (0..n).map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 }).collect()
}

/// Random point of the nonnegative L1 ball of radius `c` in dimension `dim`.
pub fn random_dual(rng: &mut impl Rng, dim: usize, c: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..dim).map(|_| rng.random_range(0.0..1.0f64)).collect();
    let total: f64 = raw.iter().sum::<f64>().max(1e-12);
    let radius = rng.random_range(0.0..c);
    raw.iter().map(|x| x / total * radius).collect()
}
