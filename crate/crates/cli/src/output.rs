//! File writers.

use std::io::Write;
use std::path::{Path, PathBuf};

use fairpost_core::solver::TrajectoryRecord;
use serde::Serialize;

use crate::error::CliResult;

/// Column order of `trajectory.csv`; bump [`TRAJECTORY_SCHEMA`] on change.
pub const TRAJECTORY_HEADER: &str =
    "t,err_hat,max_violation_hat,lambda_l1,mixture_err_hat,mixture_max_violation_hat,duality_gap_estimate";
pub const TRAJECTORY_SCHEMA: u32 = 1;
pub const PARETO_HEADER: &str = "gamma,err_hat,true_err,max_violation_hat,max_true_violation,status";

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_trajectory(path: &Path, records: &[TrajectoryRecord]) -> CliResult<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{TRAJECTORY_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.t,
            r.err_hat,
            r.max_violation_hat,
            r.lambda_l1,
            r.mixture_err_hat,
            r.mixture_max_violation_hat,
            opt(r.duality_gap_estimate)
        )?;
    }
    out.flush()?;
    Ok(())
}

/// One row of `pareto.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParetoRow {
    pub gamma: f64,
    pub err_hat: Option<f64>,
    pub true_err: Option<f64>,
    pub max_violation_hat: Option<f64>,
    pub max_true_violation: Option<f64>,
    pub status: String,
}

pub fn write_pareto(path: &Path, rows: &[ParetoRow]) -> CliResult<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{PARETO_HEADER}")?;
    for r in rows {
        let status = if r.status.contains([',', '"', '\n']) {
            format!("\"{}\"", r.status.replace('"', "\"\"").replace('\n', " "))
        } else {
            r.status.clone()
        };
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.gamma,
            opt(r.err_hat),
            opt(r.true_err),
            opt(r.max_violation_hat),
            opt(r.max_true_violation),
            status
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Collects the names of written files for the manifest.
#[derive(Debug, Default)]
pub struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    pub fn new(dir: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }
}
