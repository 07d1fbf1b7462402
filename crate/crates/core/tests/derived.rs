//! Independent recomputations of quantities the library computes by aggregation.

mod common;

use std::collections::HashMap;

use fairpost_core::metrics::{self, BetaMode, Regressor};
use fairpost_core::multical::{self, CheckFunction};
use fairpost_core::oracle;
use fairpost_core::solver::{self, DualState, SolverConfig};
use fairpost_core::synth::{self, BiasProfile, SynthSpec};
use fairpost_core::{build_cells, Classifier, FairnessNotion, GroupSystem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn labelled_fixture(seed: u64, cells: usize, miscal: f64) -> fairpost_core::CellDistribution {
    let mut spec = SynthSpec::new(seed, cells, 2, 20, BiasProfile::Uniform);
    spec.miscalibration = miscal;
    synth::gen_instance(&spec).unwrap().perturbed
}

#[test]
fn build_cells_matches_hash_recount() {
    let truth = labelled_fixture(7, 30, 0.0);
    let rows = synth::sample_rows(&truth, 1000, 7).unwrap();
    let gs = GroupSystem::with_all_group(["a".to_string(), "b".to_string()]).unwrap();
    let dist = build_cells(&rows, 20, gs).unwrap();

    let mut recount: HashMap<(i64, String), (usize, f64)> = HashMap::new();
    for r in &rows {
        let key = ((r.score * 20.0).round() as i64, r.groups.to_string());
        let e = recount.entry(key).or_default();
        e.0 += 1;
        e.1 += r.label.unwrap();
    }
    assert_eq!(dist.len(), recount.len());
    assert!((dist.total_mass() - 1.0).abs() < 1e-12);
    for c in dist.cells() {
        let (n, ysum) = recount[&(c.level as i64, c.groups.to_string())];
        assert_eq!(c.mass, n as f64 / 1000.0);
        assert!((c.label_mean.unwrap() - ysum / n as f64).abs() < 1e-15);
    }
}

#[test]
fn mixture_probability_matches_rule_enumeration() {
    let spec = SynthSpec::new(1, 8, 2, 20, BiasProfile::TwoGroupBias);
    let dist = synth::gen_instance(&spec).unwrap().truth;
    let mut cfg = SolverConfig::new(FairnessNotion::Fp, 0.01, 3.0);
    cfg.record_every = 100;
    let res = solver::run(&dist, Regressor::Scores, &cfg).unwrap();
    for cell in dist.cells() {
        let mut ones = 0usize;
        for rule in res.mixture.rules() {
            // pointwise minimizer of the Lagrangian, an independent formula for the rule
            if oracle::pointwise_argmin(&rule.lambda, cell, rule.notion, &rule.base).decision {
                ones += 1;
            }
        }
        let expected = ones as f64 / res.mixture.len() as f64;
        assert_eq!(res.mixture.positive_prob(cell), expected);
    }
}

#[test]
fn base_rates_by_direct_summation() {
    let dist = labelled_fixture(3, 25, 0.0);
    for notion in FairnessNotion::ALL {
        let a = metrics::base_rates(&dist, notion, BetaMode::FromScores).unwrap();
        let b = metrics::base_rates(&dist, notion, BetaMode::FromLabels).unwrap();
        for g in 0..dist.group_count() {
            let (mut num, mut den) = (0.0, 0.0);
            for c in dist.cells() {
                let q = c.label_mean.unwrap();
                let k = match notion {
                    FairnessNotion::Fp => 1.0 - q,
                    FairnessNotion::Fn => q,
                    _ => 1.0,
                };
                den += c.mass * k;
                if c.in_group(g) {
                    num += c.mass * k;
                }
            }
            assert!((a.beta[g] - num / den).abs() < 1e-12);
            assert!((b.beta[g] - num / den).abs() < 1e-12);
            assert!((a.w[g] - num).abs() < 1e-12);
        }
    }
}

#[test]
fn group_rate_matches_per_sample_sum() {
    let truth = labelled_fixture(4, 20, 0.0);
    let rows = synth::sample_rows(&truth, 2000, 99).unwrap();
    let gs = truth.groups().clone();
    let dist = build_cells(&rows, 20, gs).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let p: HashMap<(u32, String), f64> = dist
        .cells()
        .iter()
        .map(|c| ((c.level, c.groups.to_string()), rng.random_range(0.0..1.0)))
        .collect();
    let probs: Vec<f64> = dist
        .cells()
        .iter()
        .map(|c| p[&(c.level, c.groups.to_string())])
        .collect();
    for notion in FairnessNotion::ALL {
        for g in 0..dist.group_count() {
            let agg = metrics::surrogate_group_rate(&probs, Some(g), &dist, Regressor::Scores, notion).unwrap();
            let mut brute = 0.0;
            for r in &rows {
                if !r.groups.get(g) {
                    continue;
                }
                let level = (r.score * 20.0).round() as u32;
                let pv = p[&(level, r.groups.to_string())];
                let f = r.score;
                brute += match notion {
                    FairnessNotion::Fp => pv * (1.0 - f),
                    FairnessNotion::Fn => (1.0 - pv) * f,
                    FairnessNotion::Err => (1.0 - pv) * f + pv * (1.0 - f),
                    FairnessNotion::Sp => pv,
                };
            }
            brute /= rows.len() as f64;
            assert!((agg - brute).abs() < 1e-12, "{notion} g={g}: {agg} vs {brute}");
        }
    }
}

#[test]
fn true_rates_match_monte_carlo() {
    let dist = labelled_fixture(11, 16, 0.1);
    let probs = common::random_labeling(11, dist.len());
    let report = metrics::true_rates(&probs, &dist, FairnessNotion::Fp).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(1_000_003);
    let n = 1_000_000;
    let cumulative: Vec<f64> = dist
        .cells()
        .iter()
        .scan(0.0, |acc, c| {
            *acc += c.mass;
            Some(*acc)
        })
        .collect();
    let groups = dist.group_count();
    let mut errors = 0u64;
    let mut fp = vec![0u64; groups];
    let mut neg = vec![0u64; groups];
    for _ in 0..n {
        let u = rng.random_range(0.0..*cumulative.last().unwrap());
        let i = cumulative.partition_point(|&x| x <= u).min(dist.len() - 1);
        let cell = &dist.cells()[i];
        let y = rng.random_bool(cell.label_mean.unwrap());
        let h = probs[i] == 1.0;
        errors += (h != y) as u64;
        if !y {
            for g in 0..groups {
                if cell.in_group(g) {
                    neg[g] += 1;
                    fp[g] += h as u64;
                }
            }
        }
    }
    let err_hat = errors as f64 / n as f64;
    let sd = (report.err * (1.0 - report.err) / n as f64).sqrt();
    assert!(
        (err_hat - report.err).abs() <= 3.0 * sd,
        "err {err_hat} vs {}",
        report.err
    );
    for g in 0..groups {
        let rho = report.rho_by_group[g];
        let est = fp[g] as f64 / neg[g] as f64;
        let sd = (rho * (1.0 - rho) / neg[g] as f64).sqrt();
        assert!((est - rho).abs() <= 3.0 * sd, "group {g}: {est} vs {rho}");
    }
}

#[test]
fn gradient_matches_finite_differences() {
    let dist = labelled_fixture(5, 20, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let gamma = 0.03;
    for notion in FairnessNotion::ALL {
        let base = metrics::base_rates(&dist, notion, BetaMode::FromScores).unwrap();
        let groups = dist.group_count();
        let stacked = common::random_dual(&mut rng, 2 * groups, 4.0);
        let dual = DualState::new(stacked[..groups].to_vec(), stacked[groups..].to_vec(), 4.0).unwrap();
        let lambda = dual.signed();
        let rule = fairpost_core::ThresholdRule::new(lambda, notion, std::sync::Arc::new(base.clone()));
        let probs = rule.probs(&dist);
        let (gp, gm) = solver::dual_gradient(&probs, &dist, Regressor::Scores, &base, gamma).unwrap();
        let l0 = solver::lagrangian_value(&probs, &dual, &dist, Regressor::Scores, &base, gamma).unwrap();
        let h = 1e-6;
        for g in 0..groups {
            let mut plus = dual.lambda_plus().to_vec();
            plus[g] += h;
            let d = DualState::new(plus, dual.lambda_minus().to_vec(), 4.0).unwrap();
            let l = solver::lagrangian_value(&probs, &d, &dist, Regressor::Scores, &base, gamma).unwrap();
            assert!(((l - l0) / h - gp[g]).abs() < 1e-6, "{notion} +{g}");
            let mut minus = dual.lambda_minus().to_vec();
            minus[g] += h;
            let d = DualState::new(dual.lambda_plus().to_vec(), minus, 4.0).unwrap();
            let l = solver::lagrangian_value(&probs, &d, &dist, Regressor::Scores, &base, gamma).unwrap();
            assert!(((l - l0) / h - gm[g]).abs() < 1e-6, "{notion} -{g}");
        }
    }
}

#[test]
fn audit_matches_per_sample_resummation() {
    let mut spec = SynthSpec::new(9, 24, 2, 20, BiasProfile::Uniform);
    spec.miscalibration = 0.15;
    let inst = synth::gen_instance(&spec).unwrap();
    let rows = synth::sample_rows(&inst.perturbed, 3000, 9).unwrap();
    let dist = build_cells(&rows, 20, inst.perturbed.groups().clone()).unwrap();
    let values: Vec<f64> = dist.cells().iter().map(|c| c.score).collect();
    let base = std::sync::Arc::new(metrics::base_rates(&dist, FairnessNotion::Fp, BetaMode::FromScores).unwrap());
    let checks = vec![
        CheckFunction::Group(0),
        CheckFunction::Group(1),
        CheckFunction::Group(2),
        CheckFunction::Threshold {
            lambda: vec![0.0, 1.5, -0.7],
            notion: FairnessNotion::Fp,
            base: base.clone(),
        },
    ];
    let report = multical::audit(&values, &checks, &dist).unwrap();
    for (k, check) in checks.iter().enumerate() {
        let mut by_level: HashMap<i64, f64> = HashMap::new();
        for r in &rows {
            let v = r.score;
            let cell = fairpost_core::Cell::new((v * 20.0).round() as u32, 20, r.groups.clone(), 0.0, None);
            if check.eval(&cell, v) {
                *by_level.entry((v * 20.0).round() as i64).or_default() += (v - r.label.unwrap()) / rows.len() as f64;
            }
        }
        let brute: f64 = by_level.values().map(|x| x.abs()).sum();
        assert!(
            (report.per_check[k] - brute).abs() < 1e-12,
            "check {k}: {} vs {brute}",
            report.per_check[k]
        );
    }
}

#[test]
fn brier_matches_monte_carlo() {
    let dist = labelled_fixture(12, 15, 0.2);
    let values: Vec<f64> = dist.cells().iter().map(|c| c.score).collect();
    let b = multical::brier(&values, &dist).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let n = 1_000_000;
    let (mut sum, mut sum2) = (0.0, 0.0);
    let total = dist.total_mass();
    for _ in 0..n {
        let mut u = rng.random_range(0.0..total);
        let mut i = 0;
        while i + 1 < dist.len() && u >= dist.cells()[i].mass {
            u -= dist.cells()[i].mass;
            i += 1;
        }
        let y = if rng.random_bool(dist.cells()[i].label_mean.unwrap()) {
            1.0
        } else {
            0.0
        };
        let e = (y - values[i]) * (y - values[i]);
        sum += e;
        sum2 += e * e;
    }
    let mean = sum / n as f64;
    let sd = ((sum2 / n as f64 - mean * mean) / n as f64).sqrt();
    assert!((mean - b).abs() <= 3.0 * sd, "{mean} vs {b}");
}

#[test]
fn sampled_run_approaches_exact_run() {
    let dist = labelled_fixture(2, 8, 0.0);
    let mut cfg = SolverConfig::new(FairnessNotion::Fp, 0.02, 1.0);
    cfg.record_every = 1000;
    let eps = 0.01;
    let exact = solver::run(&dist, Regressor::Scores, &cfg).unwrap();
    let sampled = solver::run_sampled(&dist, Regressor::Scores, &cfg, 3, eps, 0.1).unwrap();
    let a = exact.trajectory.last().unwrap().mixture_err_hat;
    let b = sampled.trajectory.last().unwrap().mixture_err_hat;
    assert!((a - b).abs() <= 2.0 * eps, "{a} vs {b}");
}

#[test]
fn projection_example_against_bisection() {
    let v = [2.0, 1.0, 1.0];
    let (mut lo, mut hi) = (0.0f64, 2.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let s: f64 = v.iter().map(|x| (x - mid).max(0.0)).sum();
        if s > 2.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    assert!((lo - 2.0 / 3.0).abs() < 1e-12);
    let mut p = v;
    solver::project_l1(&mut p, 2.0, solver::ProjectionMode::Euclidean);
    for (x, y) in p.iter().zip(v) {
        assert!((x - (y - lo).max(0.0)).abs() < 1e-12);
    }
}
