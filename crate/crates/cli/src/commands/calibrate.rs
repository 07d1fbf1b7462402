use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use fairpost_core::multical::{self, PatchRecord};
use fairpost_core::{Cell, CellDistribution, GroupMask};
use serde::Serialize;

use super::audit::{build_checks, CheckArgs};
use crate::config::{DEFAULT_GRID_M, DEFAULT_TOLERANCE};
use crate::dataset;
use crate::error::{CliError, CliResult};
use crate::manifest::{input_record, RunManifest};
use crate::output::{self, Outputs};

pub const HISTORY_HEADER: &str = "round,check,level,set_mass,v_tilde,v_new,potential_before,potential_after";

#[derive(Debug, Clone, Args)]
pub struct CalibrateArgs {
    /// Labelled dataset; its scores are the initial predictor.
    pub dataset: PathBuf,
    #[arg(short, long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
    #[arg(long, default_value_t = DEFAULT_GRID_M)]
    pub grid_m: u32,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    pub tolerance: f64,
    #[command(flatten)]
    pub checks: CheckArgs,
}

#[derive(Debug, Clone, Serialize)]
pub struct CalibrationReport {
    pub alpha: f64,
    pub grid_m: u32,
    pub checks: usize,
    pub rounds: usize,
    pub round_bound: f64,
    pub potential_initial: f64,
    pub potential_final: f64,
    pub min_decrease: Option<f64>,
    pub decrease_bound: f64,
    pub audit_max_before: f64,
    pub audit_max_after: f64,
    pub audit_bound: f64,
    pub within_guarantee: bool,
}

fn write_history(path: &std::path::Path, history: &[PatchRecord]) -> CliResult<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{HISTORY_HEADER}")?;
    for p in history {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            p.round, p.check, p.level, p.set_mass, p.v_tilde, p.v_new, p.potential_before, p.potential_after
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Cells re-scored on the calibration grid; cells landing on the same key are merged.
pub fn recalibrated_cells(dist: &CellDistribution, levels: &[u32], grid_m: u32) -> CliResult<CellDistribution> {
    let mut merged: BTreeMap<(u32, GroupMask), (f64, Option<f64>)> = BTreeMap::new();
    for (cell, &level) in dist.cells().iter().zip(levels) {
        let entry = merged
            .entry((level, cell.groups.clone()))
            .or_insert((0.0, cell.label_mean.map(|_| 0.0)));
        entry.0 += cell.mass;
        if let (Some(acc), Some(q)) = (entry.1.as_mut(), cell.label_mean) {
            *acc += cell.mass * q;
        }
    }
    let cells = merged
        .into_iter()
        .map(|((level, groups), (mass, weighted))| {
            let q = weighted.map(|w| if mass > 0.0 { (w / mass).clamp(0.0, 1.0) } else { 0.0 });
            Cell::new(level, grid_m, groups, mass, q)
        })
        .collect();
    Ok(CellDistribution::new(grid_m, dist.groups().clone(), cells)?)
}

pub fn run(args: &CalibrateArgs) -> CliResult<()> {
    let mut manifest = RunManifest::new(
        "calibrate",
        serde_json::json!({
            "alpha": args.alpha,
            "grid_m": args.grid_m,
            "tolerance": args.tolerance,
            "random_checks": args.checks.random_checks,
            "C": args.checks.bound,
            "notion": args.checks.notion,
            "seed": args.checks.seed,
            "mixture": args.checks.mixture,
        }),
    );
    let data = manifest.time("load", || dataset::load(&args.dataset, args.grid_m))?;
    manifest.inputs.push(input_record(&args.dataset, &data));
    let dist = &data.dist;
    let (checks, _) = build_checks(dist, &args.checks)?;
    let initial: Vec<f64> = dist.cells().iter().map(|c| c.score).collect();
    let before = multical::audit(&initial, &checks, dist)?;
    let cal = manifest.time("calibrate", || multical::calibrate(&initial, &checks, dist, args.alpha))?;
    let after = multical::audit(&cal.state.values(), &checks, dist)?;
    let audit_bound = args.alpha.sqrt();
    let min_decrease = cal
        .history
        .iter()
        .map(|p| p.potential_before - p.potential_after)
        .reduce(f64::min);
    let report = CalibrationReport {
        alpha: args.alpha,
        grid_m: cal.state.grid_m,
        checks: checks.len(),
        rounds: cal.history.len(),
        round_bound: cal.round_bound(),
        potential_initial: cal.initial.potential,
        potential_final: cal.state.potential,
        min_decrease,
        decrease_bound: args.alpha * args.alpha / 4.0,
        audit_max_before: before.max,
        audit_max_after: after.max,
        audit_bound,
        within_guarantee: after.max <= audit_bound + args.tolerance,
    };

    let mut outputs = Outputs::new(&args.out)?;
    write_history(&outputs.path("calibration_history.csv"), &cal.history)?;
    let calibrated = recalibrated_cells(dist, &cal.state.levels, cal.state.grid_m)?;
    output::write_json(&outputs.path("calibrated_cells.json"), &calibrated)?;
    output::write_json(&outputs.path("calibration_report.json"), &report)?;
    println!(
        "rounds={} audit_before={} audit_after={} bound={}",
        report.rounds, report.audit_max_before, report.audit_max_after, audit_bound
    );
    let status = if report.within_guarantee {
        Ok(())
    } else {
        Err(CliError::Guarantee(format!(
            "post-calibration audit {} exceeds {audit_bound}",
            after.max
        )))
    };
    manifest.write(&mut outputs, status.as_ref().err().map_or(0, CliError::exit_code))?;
    status
}
