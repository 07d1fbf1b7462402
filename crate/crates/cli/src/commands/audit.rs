use std::path::PathBuf;

use clap::Args;
use fairpost_core::multical;
use fairpost_core::{BetaMode, FairnessNotion};
use serde::Serialize;

use super::{default_checks, CheckSpec, DEFAULT_RANDOM_CHECKS};
use crate::config::DEFAULT_GRID_M;
use crate::dataset;
use crate::error::CliResult;
use crate::manifest::{input_record, RunManifest};
use crate::mixture_file::MixtureFile;
use crate::output::{self, Outputs};

/// Flags selecting the check family, shared with `calibrate`.
#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    /// Mixture whose rules are added as checks.
    #[arg(long)]
    pub mixture: Option<PathBuf>,
    /// Number of random thresholds drawn from the L1 ball.
    #[arg(long, default_value_t = DEFAULT_RANDOM_CHECKS)]
    pub random_checks: usize,
    /// Radius of the L1 ball for random thresholds.
    #[arg(short = 'C', long = "bound", default_value_t = 10.0)]
    pub bound: f64,
    /// Notion of the random thresholds; defaults to the mixture's, else fp.
    #[arg(long)]
    pub notion: Option<FairnessNotion>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct AuditArgs {
    /// Labelled dataset; its scores are audited against its label means.
    pub dataset: PathBuf,
    #[arg(short, long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_GRID_M)]
    pub grid_m: u32,
    #[command(flatten)]
    pub checks: CheckArgs,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub check: String,
    pub violation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditOutput {
    pub checks: Vec<CheckResult>,
    pub max_violation: f64,
    pub argmax: Option<usize>,
}

pub(crate) fn build_checks(
    dist: &fairpost_core::CellDistribution,
    args: &CheckArgs,
) -> CliResult<(Vec<multical::CheckFunction>, Option<MixtureFile>)> {
    let mixture_file = args.mixture.as_deref().map(MixtureFile::load).transpose()?;
    if let Some(m) = &mixture_file {
        m.check_groups(dist.groups().names())?;
    }
    let mixture = mixture_file.as_ref().map(MixtureFile::to_mixture);
    let notion = args
        .notion
        .or(mixture_file.as_ref().map(|m| m.notion))
        .unwrap_or(FairnessNotion::Fp);
    let spec = CheckSpec {
        notion,
        beta_mode: BetaMode::FromScores,
        bound: args.bound,
        random: args.random_checks,
        seed: args.seed,
        mixture: mixture.as_ref(),
    };
    Ok((default_checks(dist, &spec)?, mixture_file))
}

pub fn run(args: &AuditArgs) -> CliResult<()> {
    let mut manifest = RunManifest::new(
        "audit",
        serde_json::json!({
            "grid_m": args.grid_m,
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
    let values: Vec<f64> = dist.cells().iter().map(|c| c.score).collect();
    let report = manifest.time("audit", || multical::audit(&values, &checks, dist))?;
    let argmax = report
        .per_check
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, f64)>, (i, &v)| match best {
            Some((_, b)) if b >= v => best,
            _ => Some((i, v)),
        })
        .map(|(i, _)| i);
    let out = AuditOutput {
        checks: checks
            .iter()
            .zip(&report.per_check)
            .map(|(c, &v)| CheckResult {
                check: c.describe(),
                violation: v,
            })
            .collect(),
        max_violation: report.max,
        argmax,
    };
    let mut outputs = Outputs::new(&args.out)?;
    output::write_json(&outputs.path("audit.json"), &out)?;
    println!("checks={} max_violation={}", out.checks.len(), out.max_violation);
    manifest.write(&mut outputs, 0)
}
