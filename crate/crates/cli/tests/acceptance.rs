//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line.
//!
//! Run with `cargo test -p fairpost-cli --test acceptance -- --nocapture --include-ignored`
//! to see every line, including the criterion that is known to fail as stated.

use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use fairpost_cli::commands::random_l1_point;
use fairpost_core::multical::{self, CheckFunction};
use fairpost_core::oracle::{self, FEASIBILITY_TOL};
use fairpost_core::solver::{self, ProjectionMode};
use fairpost_core::synth::{self, BiasProfile, SynthSpec};
use fairpost_core::{
    metrics, BetaMode, CellDistribution, Classifier, DualState, FairnessNotion, Regressor, SolverConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const NOTIONS: [FairnessNotion; 4] = [
    FairnessNotion::Fp,
    FairnessNotion::Fn,
    FairnessNotion::Err,
    FairnessNotion::Sp,
];

fn verdict(id: u32, name: &str, pass: bool, detail: String) {
    println!(
        "criterion {id:>2} {name}: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {id} failed: {detail}");
}

/// The `two_group_bias` seed=1 fixture: 8 cells, two groups plus the all-group.
fn seed1_fixture() -> CellDistribution {
    synth::gen_instance(&SynthSpec::new(1, 8, 2, 20, BiasProfile::TwoGroupBias))
        .unwrap()
        .truth
}

/// A spread of synthetic instances with scores away from the label means.
fn instance(seed: u64) -> CellDistribution {
    let profiles = [
        BiasProfile::Uniform,
        BiasProfile::TwoGroupBias,
        BiasProfile::AdversarialOverlap,
    ];
    let mut spec = SynthSpec::new(
        seed,
        6 + (seed % 7) as usize,
        1 + (seed % 3) as usize,
        20,
        profiles[(seed % 3) as usize],
    );
    spec.miscalibration = 0.2;
    synth::gen_instance(&spec).unwrap().perturbed
}

fn random_dual(rng: &mut ChaCha8Rng, groups: usize, c: f64) -> DualState {
    let p = random_l1_point(rng, 2 * groups, c);
    DualState::new(
        p[..groups].iter().map(|x| x.abs()).collect(),
        p[groups..].iter().map(|x| x.abs()).collect(),
        c,
    )
    .unwrap()
}

#[test]
fn c01_gap_certification() {
    let dist = seed1_fixture();
    let (gamma, c) = (0.01, 10.0);
    let mut worst = Vec::new();
    let mut pass = true;
    for notion in NOTIONS {
        let start = Instant::now();
        let mut cfg = SolverConfig::new(notion, gamma, c);
        cfg.record_every = 100_000;
        let result = solver::run(&dist, Regressor::Scores, &cfg).unwrap();
        let elapsed = start.elapsed().as_secs_f64();
        let probs = result.mixture.probs(&dist);
        let err = metrics::surrogate_error(&probs, &dist, Regressor::Scores).unwrap();
        let weighted = metrics::true_rates(&probs, &dist, notion).unwrap().max_violation;
        let opt = oracle::enumerate_optimum(&dist, Regressor::Scores, &result.base, gamma, FEASIBILITY_TOL).unwrap();
        let vertex = oracle::vertex_optimum(&dist, Regressor::Scores, &result.base, gamma).unwrap();
        let ok = result.iterations == 313_600
            && err <= opt.opt_value + 2.0 / c + 0.01
            && weighted <= gamma + 1.0 / c + 2.0 / (c * c) + 0.01
            && (opt.opt_value - vertex.opt_value).abs() <= 0.005
            && elapsed <= 60.0;
        pass &= ok;
        worst.push(format!(
            "{notion}: err-opt={:+.5} viol={:.5} {:.2}s",
            err - opt.opt_value,
            weighted,
            elapsed
        ));
    }
    verdict(1, "gap certification", pass, worst.join("; "));
}

#[test]
fn c02_best_response_matches_pointwise_argmin() {
    let start = Instant::now();
    let instances: Vec<CellDistribution> = (0..20).map(instance).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut mismatches, mut ties) = (0, 0);
    for draw in 0..10_000 {
        let dist = &instances[rng.random_range(0..instances.len())];
        let notion = NOTIONS[rng.random_range(0..4)];
        let base = metrics::base_rates(dist, notion, BetaMode::FromScores).unwrap();
        let cell = &dist.cells()[rng.random_range(0..dist.len())];
        let lambda = if draw % 50 == 0 {
            vec![0.0; dist.group_count()]
        } else {
            random_l1_point(&mut rng, dist.group_count(), 5.0)
        };
        let br = solver::best_response(&lambda, &cell.groups, cell.score, notion, &base);
        let pw = oracle::pointwise_argmin(&lambda, cell, notion, &base);
        ties += pw.tie as usize;
        mismatches += (br != pw.decision) as usize;
    }
    let elapsed = start.elapsed().as_secs_f64();
    verdict(
        2,
        "best response",
        mismatches == 0 && elapsed <= 5.0,
        format!("{mismatches} mismatches, {ties} ties, {elapsed:.2}s"),
    );
}

#[test]
fn c03_lagrangian_forms() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for k in 0..400 {
        let dist = instance(100 + k);
        let notion = NOTIONS[k as usize % 4];
        let base = metrics::base_rates(&dist, notion, BetaMode::FromScores).unwrap();
        let dual = random_dual(&mut rng, dist.group_count(), 10.0);
        let probs: Vec<f64> = (0..dist.len())
            .map(|_| {
                if rng.random_bool(0.5) {
                    rng.random::<f64>()
                } else {
                    rng.random_range(0..2) as f64
                }
            })
            .collect();
        let gamma = rng.random_range(0.0..0.1);
        let a = solver::lagrangian_value(&probs, &dual, &dist, Regressor::Scores, &base, gamma).unwrap();
        let b = solver::lagrangian_expanded(&probs, &dual, &dist, Regressor::Scores, &base, gamma).unwrap();
        worst = worst.max((a - b).abs());
    }
    verdict(
        3,
        "lagrangian identity",
        worst <= 1e-10,
        format!("max |Δ| = {worst:.2e}"),
    );
}

#[test]
fn c04_constraint_equals_weighted_gap() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for k in 0..200 {
        let dist = instance(1000 + k);
        let probs: Vec<f64> = (0..dist.len()).map(|_| rng.random::<f64>()).collect();
        for notion in NOTIONS {
            let base = metrics::base_rates(&dist, notion, BetaMode::FromLabels).unwrap();
            let lhs = metrics::constraint_lhs_all(&probs, &dist, Regressor::LabelMean, &base).unwrap();
            let report = metrics::true_rates(&probs, &dist, notion).unwrap();
            for (l, v) in lhs.iter().zip(&report.violation_by_group) {
                worst = worst.max((l.abs() - v).abs());
            }
        }
    }
    verdict(
        4,
        "constraint = weighted rate gap",
        worst <= 1e-10,
        format!("max |Δ| = {worst:.2e}"),
    );
}

#[test]
#[ignore = "fails as stated: the threshold check is the complement of the best response off ties"]
fn c05_threshold_check_equals_best_response() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut compared, mut mismatches) = (0, 0);
    for k in 0..50 {
        let dist = instance(2000 + k);
        let base = metrics::base_rates(&dist, FairnessNotion::Fp, BetaMode::FromScores).unwrap();
        let lambda = random_l1_point(&mut rng, dist.group_count(), 5.0);
        for cell in dist.cells() {
            let s = solver::centered_sum(&lambda, &cell.groups, &base);
            if 2.0 + s <= 0.0 {
                continue;
            }
            compared += 1;
            let check = multical::threshold_eval(&lambda, &base, &cell.groups, cell.score, FairnessNotion::Fp);
            let br = solver::best_response(&lambda, &cell.groups, cell.score, FairnessNotion::Fp, &base);
            mismatches += (check != br) as usize;
        }
    }
    verdict(
        5,
        "threshold check = best response",
        mismatches == 0,
        format!("{mismatches} of {compared} cells differ"),
    );
}

#[test]
fn c06_calibration_guarantees() {
    let start = Instant::now();
    let alpha = 0.01;
    let mut spec = SynthSpec::new(9, 24, 2, 20, BiasProfile::Uniform);
    spec.miscalibration = 0.3;
    let dist = synth::gen_instance(&spec).unwrap().perturbed;
    let groups = dist.group_count();

    let mut checks: Vec<CheckFunction> = (0..groups).map(CheckFunction::Group).collect();
    let base = Arc::new(metrics::base_rates(&dist, FairnessNotion::Fp, BetaMode::FromScores).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..64 {
        checks.push(CheckFunction::Threshold {
            lambda: random_l1_point(&mut rng, groups, 10.0),
            notion: FairnessNotion::Fp,
            base: base.clone(),
        });
    }
    let mut cfg = SolverConfig::new(FairnessNotion::Fp, 0.01, 10.0);
    cfg.record_every = 100_000;
    let run = solver::run(&dist, Regressor::Scores, &cfg).unwrap();
    let rules = run.mixture.rules();
    for i in 0..32 {
        let r = &rules[i * rules.len() / 32];
        checks.push(CheckFunction::Threshold {
            lambda: r.lambda.clone(),
            notion: r.notion,
            base: r.base.clone(),
        });
    }

    let initial: Vec<f64> = dist.cells().iter().map(|c| c.score).collect();
    let cal = multical::calibrate(&initial, &checks, &dist, alpha).unwrap();

    // replay the history on levels and recompute the potential from scratch
    let m = cal.state.grid_m as f64;
    let q = dist.label_means().unwrap();
    let potential = |levels: &[u32]| -> f64 {
        dist.cells()
            .iter()
            .zip(levels)
            .zip(&q)
            .map(|((c, &l), &qv)| {
                let v = l as f64 / m;
                c.mass * (qv * (1.0 - v) * (1.0 - v) + (1.0 - qv) * v * v)
            })
            .sum()
    };
    let mut levels = cal.initial.levels.clone();
    let mut min_drop = f64::INFINITY;
    for p in &cal.history {
        let before = potential(&levels);
        let level = (p.level * m).round() as u32;
        let target = (p.v_new * m).round() as u32;
        for (i, cell) in dist.cells().iter().enumerate() {
            if levels[i] == level && checks[p.check].eval(cell, level as f64 / m) {
                levels[i] = target;
            }
        }
        min_drop = min_drop.min(before - potential(&levels));
    }
    let replay_ok = levels == cal.state.levels;
    let rounds_ok = (cal.history.len() as f64) <= 4.0 / (alpha * alpha);
    let drop_ok = cal.history.is_empty() || min_drop >= alpha * alpha / 4.0;
    let after = multical::audit(&cal.state.values(), &checks, &dist).unwrap();
    let audit_ok = after.max <= alpha.sqrt();
    let elapsed = start.elapsed().as_secs_f64();
    verdict(
        6,
        "calibration guarantees",
        replay_ok && rounds_ok && drop_ok && audit_ok && elapsed <= 120.0,
        format!(
            "{} rounds, min drop {min_drop:.3e}, audit {:.4} ≤ {:.1}, replay {replay_ok}, {elapsed:.2}s",
            cal.history.len(),
            after.max,
            alpha.sqrt()
        ),
    );
}

/// Upper end of the two-sided 95% Wilson interval for `k` successes in `n` trials.
fn wilson_upper(k: usize, n: usize) -> f64 {
    let (k, n, z) = (k as f64, n as f64, 1.96f64);
    let p = k / n;
    let centre = p + z * z / (2.0 * n);
    let spread = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt();
    (centre + spread) / (1.0 + z * z / n)
}

#[test]
fn c07_sampled_estimation() {
    let start = Instant::now();
    let (eps, delta) = (0.05, 0.05);
    let dist = seed1_fixture();
    let cfg = SolverConfig::new(FairnessNotion::Fp, 0.01, 1.0);
    let t = cfg.resolved_iterations(dist.group_count());
    let m = solver::sample_size(t, dist.group_count(), eps, delta);
    let (mut total, mut bad) = (0usize, 0usize);
    for trial in 0..200 {
        let r = solver::run_sampled(&dist, Regressor::Scores, &cfg, trial, eps, delta).unwrap();
        assert_eq!(r.estimation.len() as u64, t);
        for rec in &r.estimation {
            total += rec.group_deviation.len();
            bad += rec.group_deviation.iter().filter(|&&d| d > eps).count();
        }
    }
    let frac = bad as f64 / total as f64;
    let upper = wilson_upper(bad, total);
    let elapsed = start.elapsed().as_secs_f64();
    verdict(
        7,
        "sampled estimation",
        frac <= delta && upper <= delta && elapsed <= 60.0,
        format!("T={t} m={m}: {bad}/{total} beyond ε, 95% upper {upper:.2e}, {elapsed:.2}s"),
    );
}

fn water_fill(x: &[f64], radius: f64) -> Vec<f64> {
    if x.iter().sum::<f64>() <= radius {
        return x.to_vec();
    }
    let (mut lo, mut hi) = (0.0, x.iter().copied().fold(0.0, f64::max));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if x.iter().map(|v| (v - mid).max(0.0)).sum::<f64>() > radius {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let theta = 0.5 * (lo + hi);
    x.iter().map(|v| (v - theta).max(0.0)).collect()
}

#[test]
fn c08_projection() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut worst, mut interior, mut interior_moved) = (0.0f64, 0, 0);
    for _ in 0..1000 {
        let dim = rng.random_range(1..=10);
        let radius = rng.random_range(0.1..20.0);
        let scale = rng.random_range(0.0..3.0) * radius / dim as f64;
        let x: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() * 2.0 * scale).collect();
        let mut p = x.clone();
        solver::project_l1(&mut p, radius, ProjectionMode::Euclidean);
        let oracle = water_fill(&x, radius);
        for (a, b) in p.iter().zip(&oracle) {
            worst = worst.max((a - b).abs());
        }
        if x.iter().sum::<f64>() < radius {
            interior += 1;
            interior_moved += (p != x) as usize;
        }
    }
    verdict(
        8,
        "projection",
        worst <= 1e-9 && interior_moved == 0 && interior > 0,
        format!("max |Δ| = {worst:.2e}, {interior} interior points, {interior_moved} moved"),
    );
}

fn fairpost(args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_fairpost"))
        .args(args)
        .output()
        .expect("binary runs")
        .status
        .code()
        .unwrap_or(-1)
}

fn read_pareto(path: &Path) -> Vec<(f64, f64)> {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap())
        })
        .collect()
}

const SWEEP_GAMMAS: &str = "0.005,0.01,0.02,0.05,0.1,0.25";

fn fixture_file(dir: &Path) -> String {
    let out = dir.join("synth");
    let code = fairpost(&[
        "synth",
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "1",
        "--cells",
        "8",
        "--groups",
        "2",
        "--grid-m",
        "20",
        "--profile",
        "two_group_bias",
    ]);
    assert_eq!(code, 0);
    out.join("cells.json").to_str().unwrap().to_string()
}

fn sweep(data: &str, out: &Path) -> i32 {
    fairpost(&[
        "sweep",
        data,
        "--out",
        out.to_str().unwrap(),
        "--gammas",
        SWEEP_GAMMAS,
        "--notion",
        "fp",
        "-C",
        "10",
        "--grid-m",
        "20",
        "--record-every",
        "100000",
    ])
}

#[test]
fn c09_pareto_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let data = fixture_file(dir.path());
    let code = sweep(&data, &dir.path().join("sweep"));
    let rows = read_pareto(&dir.path().join("sweep/pareto.csv"));
    let slack = 2.0 / 10.0 + 0.01;
    let mut worst_rise = f64::NEG_INFINITY;
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            worst_rise = worst_rise.max(rows[j].1 - rows[i].1);
        }
    }
    let sorted = rows.windows(2).all(|w| w[0].0 < w[1].0);
    verdict(
        9,
        "pareto monotone",
        code == 0 && rows.len() == 6 && sorted && worst_rise <= slack,
        format!(
            "exit {code}, {} rows, largest rise {worst_rise:+.5} (slack {slack})",
            rows.len()
        ),
    );
}

#[test]
fn c10_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let data = fixture_file(dir.path());
    let mut traj = Vec::new();
    let mut pareto = Vec::new();
    for run in 0..2 {
        let out = dir.path().join(format!("solve{run}"));
        let code = fairpost(&[
            "solve",
            &data,
            "--out",
            out.to_str().unwrap(),
            "--notion",
            "fp",
            "--gamma",
            "0.01",
            "-C",
            "10",
            "--grid-m",
            "20",
            "--record-every",
            "997",
        ]);
        assert_eq!(code, 0);
        traj.push(std::fs::read(out.join("trajectory.csv")).unwrap());
        let out = dir.path().join(format!("sweep{run}"));
        assert_eq!(sweep(&data, &out), 0);
        pareto.push(std::fs::read(out.join("pareto.csv")).unwrap());
    }
    let same = traj[0] == traj[1] && pareto[0] == pareto[1];
    verdict(
        10,
        "determinism",
        same && !traj[0].is_empty(),
        format!("trajectory {} bytes, pareto {} bytes", traj[0].len(), pareto[0].len()),
    );
}
