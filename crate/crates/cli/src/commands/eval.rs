use std::path::PathBuf;

use clap::Args;
use fairpost_core::metrics::{self, RateReport};
use fairpost_core::oracle::{self, OracleSolution, FEASIBILITY_TOL};
use fairpost_core::{BetaMode, Classifier, FairnessNotion, Regressor};
use serde::Serialize;

use crate::config::DEFAULT_GRID_M;
use crate::dataset;
use crate::error::{CliError, CliResult};
use crate::manifest::{input_record, RunManifest};
use crate::mixture_file::MixtureFile;
use crate::output::{self, Outputs};

/// Allowed disagreement between the two oracle routes.
pub const ORACLE_AGREEMENT: f64 = 0.005;

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    pub dataset: PathBuf,
    #[arg(short, long, default_value = "out")]
    pub out: PathBuf,
    /// Mixture to evaluate.
    #[arg(long)]
    pub mixture: Option<PathBuf>,
    /// Solve the constrained problem exactly by enumeration.
    #[arg(long)]
    pub oracle: bool,
    /// Notion; defaults to the mixture's.
    #[arg(long)]
    pub notion: Option<FairnessNotion>,
    /// Required with --oracle.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, value_parser = ["from_scores", "from_labels"], default_value = "from_scores")]
    pub beta_mode: String,
    #[arg(long, value_parser = ["scores", "label_mean"], default_value = "scores")]
    pub regressor: String,
    #[arg(long, default_value_t = DEFAULT_GRID_M)]
    pub grid_m: u32,
}

#[derive(Debug, Clone, Serialize)]
pub struct MixtureEval {
    pub rules: usize,
    pub err_hat: f64,
    pub lhs_by_group: Vec<f64>,
    pub max_violation_hat: f64,
    pub true_rates: Option<RateReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleEval {
    pub solution: OracleSolution,
    pub vertex_opt_value: f64,
    pub vertex_candidates: u64,
    pub agreement: f64,
    pub agrees: bool,
    pub true_rates: Option<RateReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalOutput {
    pub notion: FairnessNotion,
    pub gamma: Option<f64>,
    pub mixture: Option<MixtureEval>,
    pub oracle: Option<OracleEval>,
}

pub fn run(args: &EvalArgs) -> CliResult<()> {
    let beta_mode = if args.beta_mode == "from_labels" {
        BetaMode::FromLabels
    } else {
        BetaMode::FromScores
    };
    let regressor = if args.regressor == "label_mean" {
        Regressor::LabelMean
    } else {
        Regressor::Scores
    };
    let mut manifest = RunManifest::new(
        "eval",
        serde_json::json!({
            "mixture": args.mixture,
            "oracle": args.oracle,
            "notion": args.notion,
            "gamma": args.gamma,
            "beta_mode": args.beta_mode,
            "regressor": args.regressor,
            "grid_m": args.grid_m,
        }),
    );
    let data = manifest.time("load", || dataset::load(&args.dataset, args.grid_m))?;
    manifest.inputs.push(input_record(&args.dataset, &data));
    let dist = &data.dist;
    let mixture_file = args.mixture.as_deref().map(MixtureFile::load).transpose()?;
    let notion = args
        .notion
        .or(mixture_file.as_ref().map(|m| m.notion))
        .ok_or_else(|| CliError::input("--notion is required without --mixture"))?;

    let mixture = match &mixture_file {
        None => None,
        Some(file) => {
            file.check_groups(dist.groups().names())?;
            if file.notion != notion {
                return Err(CliError::input(format!(
                    "mixture notion {} differs from --notion {notion}",
                    file.notion
                )));
            }
            let m = file.to_mixture();
            let probs = m.probs(dist);
            let lhs = metrics::constraint_lhs_all(&probs, dist, regressor, &file.base)?;
            Some(MixtureEval {
                rules: m.len(),
                err_hat: metrics::surrogate_error(&probs, dist, regressor)?,
                max_violation_hat: lhs.iter().map(|x| x.abs()).fold(0.0, f64::max),
                lhs_by_group: lhs,
                true_rates: dist
                    .has_labels()
                    .then(|| metrics::true_rates(&probs, dist, notion))
                    .transpose()?,
            })
        }
    };

    let oracle = if args.oracle {
        let gamma = args.gamma.ok_or_else(|| CliError::input("--oracle requires --gamma"))?;
        let base = metrics::base_rates(dist, notion, beta_mode)?;
        let solution = manifest.time("oracle", || {
            oracle::enumerate_optimum(dist, regressor, &base, gamma, FEASIBILITY_TOL)
        })?;
        let v = manifest.time("vertex", || oracle::vertex_optimum(dist, regressor, &base, gamma))?;
        let agreement = (solution.opt_value - v.opt_value).abs();
        let true_rates = dist
            .has_labels()
            .then(|| metrics::true_rates(&solution.probs, dist, notion))
            .transpose()?;
        Some(OracleEval {
            vertex_opt_value: v.opt_value,
            vertex_candidates: v.candidates,
            agreement,
            agrees: agreement <= ORACLE_AGREEMENT,
            true_rates,
            solution,
        })
    } else {
        None
    };

    let out = EvalOutput {
        notion,
        gamma: args.gamma,
        mixture,
        oracle,
    };
    let mut outputs = Outputs::new(&args.out)?;
    output::write_json(&outputs.path("eval.json"), &out)?;
    if let Some(m) = &out.mixture {
        println!(
            "mixture err_hat={} max_violation_hat={}",
            m.err_hat, m.max_violation_hat
        );
    }
    let status = match &out.oracle {
        Some(o) => {
            println!(
                "oracle opt={} vertex={} agreement={}",
                o.solution.opt_value, o.vertex_opt_value, o.agreement
            );
            if o.agrees {
                Ok(())
            } else {
                Err(CliError::Guarantee(format!(
                    "oracle routes disagree by {} (> {ORACLE_AGREEMENT})",
                    o.agreement
                )))
            }
        }
        None => Ok(()),
    };
    manifest.write(&mut outputs, status.as_ref().err().map_or(0, CliError::exit_code))?;
    status
}
