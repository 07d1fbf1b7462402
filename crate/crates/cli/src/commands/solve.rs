use std::path::PathBuf;

use clap::Args;
use fairpost_core::metrics::{self, RateReport};
use fairpost_core::solver::{self, SolveResult};
use fairpost_core::{CellDistribution, Classifier, TheoremBounds};
use serde::Serialize;

use crate::config::{merged, ConfigArgs, RunSettings};
use crate::dataset;
use crate::error::{CliError, CliResult};
use crate::manifest::{input_record, RunManifest};
use crate::mixture_file::MixtureFile;
use crate::output::{self, Outputs};

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    /// Dataset CSV or cell-distribution JSON.
    pub dataset: PathBuf,
    /// Output directory.
    #[arg(short, long, default_value = "out")]
    pub out: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Estimate each round's rates from a fresh sample with this accuracy.
    #[arg(long, requires = "delta")]
    pub epsilon: Option<f64>,
    /// Failure probability of the sampled estimates.
    #[arg(long, requires = "epsilon")]
    pub delta: Option<f64>,
}

/// Mixture metrics shared by `solve` and `sweep`.
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub notion: String,
    pub gamma: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "T")]
    pub iterations: u64,
    pub eta: f64,
    pub rules: usize,
    pub err_hat: f64,
    pub lhs_by_group: Vec<f64>,
    pub abs_lhs_by_group: Vec<f64>,
    pub max_violation: f64,
    /// `γ + 1/C + 2/C²` plus the sampled slack and the configured tolerance.
    pub violation_threshold: f64,
    pub within_guarantee: bool,
    pub theorem_bounds: TheoremBounds,
    pub sample_size: Option<u64>,
    pub true_rates: Option<RateReport>,
}

pub struct SolveOutcome {
    pub result: SolveResult,
    pub report: SolveReport,
}

pub fn solve_once(
    dist: &CellDistribution,
    settings: &RunSettings,
    sampled: Option<(f64, f64)>,
) -> CliResult<SolveOutcome> {
    let cfg = &settings.solver;
    let result = match sampled {
        None => solver::run(dist, settings.regressor, cfg)?,
        Some((eps, delta)) => solver::run_sampled(dist, settings.regressor, cfg, settings.seed, eps, delta)?,
    };
    let probs = result.mixture.probs(dist);
    let err_hat = metrics::surrogate_error(&probs, dist, settings.regressor)?;
    let lhs = metrics::constraint_lhs_all(&probs, dist, settings.regressor, &result.base)?;
    let abs: Vec<f64> = lhs.iter().map(|x| x.abs()).collect();
    let max_violation = abs.iter().copied().fold(0.0, f64::max);
    let bounds = result.theorem_bounds.clone();
    let violation_threshold = cfg.gamma + bounds.violation_slack + settings.tolerance;
    let true_rates = if dist.has_labels() {
        Some(metrics::true_rates(&probs, dist, cfg.notion)?)
    } else {
        None
    };
    let report = SolveReport {
        notion: cfg.notion.to_string(),
        gamma: cfg.gamma,
        c: cfg.c,
        iterations: result.iterations,
        eta: result.eta,
        rules: result.mixture.len(),
        err_hat,
        lhs_by_group: lhs,
        abs_lhs_by_group: abs,
        max_violation,
        violation_threshold,
        within_guarantee: max_violation <= violation_threshold,
        theorem_bounds: bounds,
        sample_size: result.sample_size,
        true_rates,
    };
    Ok(SolveOutcome { result, report })
}

pub fn run(args: &SolveArgs) -> CliResult<()> {
    let file = merged(&args.config)?;
    let settings = RunSettings::resolve(file)?;
    let mut manifest = RunManifest::new("solve", serde_json::to_value(&settings.echo)?);
    let data = manifest.time("load", || dataset::load(&args.dataset, settings.grid_m))?;
    manifest.inputs.push(input_record(&args.dataset, &data));
    let sampled = args.epsilon.zip(args.delta);
    let outcome = manifest.time("solve", || solve_once(&data.dist, &settings, sampled))?;

    let mut outputs = Outputs::new(&args.out)?;
    let groups = data.dist.groups().names().to_vec();
    let mixture = MixtureFile::from_mixture(&outcome.result.mixture, &groups)?;
    output::write_json(&outputs.path("mixture.json"), &mixture)?;
    output::write_trajectory(&outputs.path("trajectory.csv"), &outcome.result.trajectory)?;
    if !outcome.result.estimation.is_empty() {
        output::write_json(&outputs.path("estimation.json"), &outcome.result.estimation)?;
    }
    output::write_json(&outputs.path("report.json"), &outcome.report)?;
    manifest.theorem_bounds = Some(outcome.report.theorem_bounds.clone());

    let r = &outcome.report;
    println!(
        "err_hat={} max_violation={} threshold={} rules={}",
        r.err_hat, r.max_violation, r.violation_threshold, r.rules
    );
    let status = if r.within_guarantee {
        Ok(())
    } else {
        Err(CliError::Guarantee(format!(
            "max violation {} exceeds {}",
            r.max_violation, r.violation_threshold
        )))
    };
    let code = status.as_ref().err().map_or(0, CliError::exit_code);
    manifest.write(&mut outputs, code)?;
    status
}
