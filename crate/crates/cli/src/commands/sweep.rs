use std::path::PathBuf;

use clap::Args;
use rayon::prelude::*;

use super::solve::solve_once;
use crate::config::{merged, ConfigArgs, RunSettings};
use crate::dataset;
use crate::error::{CliError, CliResult};
use crate::manifest::{input_record, RunManifest};
use crate::output::{self, Outputs, ParetoRow};
use crate::svg;

/// Environment variable bounding the number of concurrent solver runs.
pub const WORKERS_ENV: &str = "FAIRPOST_WORKERS";

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    pub dataset: PathBuf,
    #[arg(short, long, default_value = "out")]
    pub out: PathBuf,
    /// Comma-separated γ values.
    #[arg(long, value_delimiter = ',', conflicts_with = "gamma_range")]
    pub gammas: Vec<f64>,
    /// `lo:hi:count`, evenly spaced and inclusive.
    #[arg(long)]
    pub gamma_range: Option<String>,
    /// Also write pareto.svg.
    #[arg(long)]
    pub svg: bool,
    #[command(flatten)]
    pub config: ConfigArgs,
}

fn parse_range(s: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || CliError::input(format!("gamma range {s:?} is not lo:hi:count"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    match n {
        0 => Err(bad()),
        1 => Ok(vec![lo]),
        _ => Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()),
    }
}

/// The γ grid, sorted and deduplicated.
pub fn gamma_grid(args: &SweepArgs) -> CliResult<Vec<f64>> {
    let mut gammas = match &args.gamma_range {
        Some(r) => parse_range(r)?,
        None => args.gammas.clone(),
    };
    if gammas.is_empty() {
        return Err(CliError::input("no γ values given (use --gammas or --gamma-range)"));
    }
    if let Some(g) = gammas.iter().find(|g| !(**g >= 0.0 && g.is_finite())) {
        return Err(CliError::input(format!("γ must be a finite number >= 0, got {g}")));
    }
    gammas.sort_by(f64::total_cmp);
    gammas.dedup();
    Ok(gammas)
}

fn worker_count() -> CliResult<usize> {
    match std::env::var(WORKERS_ENV) {
        Err(_) => Ok(0),
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| CliError::input(format!("{WORKERS_ENV} must be a nonnegative integer, got {v:?}"))),
    }
}

pub fn run(args: &SweepArgs) -> CliResult<()> {
    let gammas = gamma_grid(args)?;
    let mut file = merged(&args.config)?;
    // γ comes from the grid; a placeholder lets the rest of the config validate.
    file.gamma = Some(gammas[0]);
    let template = RunSettings::resolve(file)?;
    let mut echo = serde_json::to_value(&template.echo)?;
    if let Some(obj) = echo.as_object_mut() {
        obj.insert("gamma".into(), serde_json::json!(gammas));
    }
    let mut manifest = RunManifest::new("sweep", echo);
    let data = manifest.time("load", || dataset::load(&args.dataset, template.grid_m))?;
    manifest.inputs.push(input_record(&args.dataset, &data));

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count()?)
        .build()
        .map_err(|e| CliError::input(format!("worker pool: {e}")))?;
    let results: Vec<(ParetoRow, Option<CliError>)> = manifest.time("solve", || {
        pool.install(|| {
            gammas
                .par_iter()
                .map(|&gamma| {
                    let mut settings = template.clone();
                    settings.solver.gamma = gamma;
                    match solve_once(&data.dist, &settings, None) {
                        Ok(o) => {
                            let r = o.report;
                            let miss = (!r.within_guarantee).then(|| {
                                CliError::Guarantee(format!(
                                    "γ={gamma}: max violation {} exceeds {}",
                                    r.max_violation, r.violation_threshold
                                ))
                            });
                            let row = ParetoRow {
                                gamma,
                                err_hat: Some(r.err_hat),
                                true_err: r.true_rates.as_ref().map(|t| t.err),
                                max_violation_hat: Some(r.max_violation),
                                max_true_violation: r.true_rates.as_ref().map(|t| t.max_violation),
                                status: if miss.is_some() { "guarantee_miss" } else { "ok" }.into(),
                            };
                            (row, miss)
                        }
                        Err(e) => {
                            let row = ParetoRow {
                                gamma,
                                err_hat: None,
                                true_err: None,
                                max_violation_hat: None,
                                max_true_violation: None,
                                status: format!("error: {e}"),
                            };
                            (row, Some(e))
                        }
                    }
                })
                .collect()
        })
    });

    let mut outputs = Outputs::new(&args.out)?;
    let rows: Vec<ParetoRow> = results.iter().map(|(r, _)| r.clone()).collect();
    output::write_pareto(&outputs.path("pareto.csv"), &rows)?;
    if args.svg {
        let points: Vec<(f64, f64)> = rows.iter().filter_map(|r| r.err_hat.map(|e| (r.gamma, e))).collect();
        std::fs::write(outputs.path("pareto.svg"), svg::pareto_svg(&points))?;
    }
    for r in &rows {
        println!(
            "gamma={} err_hat={} status={}",
            r.gamma,
            r.err_hat.unwrap_or(f64::NAN),
            r.status
        );
    }
    let worst = results
        .into_iter()
        .filter_map(|(_, e)| e)
        .max_by_key(CliError::exit_code);
    let code = worst.as_ref().map_or(0, CliError::exit_code);
    manifest.write(&mut outputs, code)?;
    worst.map_or(Ok(()), Err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_is_inclusive() {
        assert_eq!(parse_range("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_range("0.2:9:1").unwrap(), vec![0.2]);
        assert!(parse_range("0:1").is_err());
        assert!(parse_range("0:1:0").is_err());
    }
}
