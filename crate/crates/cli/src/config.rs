//! Flat JSON run configuration; command-line flags override file values.

use std::path::{Path, PathBuf};

use clap::Args;
use fairpost_core::solver::{ProjectionMode, SolverConfig, DEFAULT_WORK_CAP};
use fairpost_core::{BetaMode, FairnessNotion, Regressor};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const DEFAULT_GRID_M: u32 = 100;
pub const DEFAULT_TOLERANCE: f64 = 1e-6;

/// A number or the literal `"auto"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AutoOr<T> {
    Value(T),
    Keyword(AutoKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoKeyword {
    Auto,
}

impl<T: Copy> AutoOr<T> {
    pub fn value(&self) -> Option<T> {
        match self {
            AutoOr::Value(v) => Some(*v),
            AutoOr::Keyword(_) => None,
        }
    }
}

fn parse_auto<T: std::str::FromStr>(s: &str) -> CliResult<AutoOr<T>> {
    if s.eq_ignore_ascii_case("auto") {
        Ok(AutoOr::Keyword(AutoKeyword::Auto))
    } else {
        s.parse()
            .map(AutoOr::Value)
            .map_err(|_| CliError::input(format!("expected a number or \"auto\", found {s:?}")))
    }
}

/// The configuration file. Every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub notion: Option<FairnessNotion>,
    pub gamma: Option<f64>,
    #[serde(rename = "C")]
    pub c: Option<f64>,
    pub eta: Option<AutoOr<f64>>,
    #[serde(rename = "T")]
    pub iterations: Option<AutoOr<u64>>,
    pub projection: Option<ProjectionMode>,
    pub beta_mode: Option<BetaMode>,
    pub grid_m: Option<u32>,
    pub record_every: Option<u64>,
    pub seed: Option<u64>,
    pub work_cap: Option<f64>,
    pub regressor: Option<Regressor>,
    pub tolerance: Option<f64>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| {
            CliError::input(format!(
                "{}: line {}, column {}: {e}",
                path.display(),
                e.line(),
                e.column()
            ))
        })
    }
}

/// Flags shared by the commands that run the solver.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// Flat JSON configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Fairness notion: fp, fn, err or sp.
    #[arg(long)]
    pub notion: Option<FairnessNotion>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Dual bound C.
    #[arg(short = 'C', long = "bound")]
    pub c: Option<f64>,
    /// Step size or "auto".
    #[arg(long)]
    pub eta: Option<String>,
    /// Number of rounds or "auto".
    #[arg(short = 'T', long = "iterations")]
    pub iterations: Option<String>,
    /// euclidean or rescale.
    #[arg(long, value_parser = parse_projection)]
    pub projection: Option<ProjectionMode>,
    /// from_scores or from_labels.
    #[arg(long, value_parser = parse_beta_mode)]
    pub beta_mode: Option<BetaMode>,
    #[arg(long)]
    pub grid_m: Option<u32>,
    #[arg(long)]
    pub record_every: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub work_cap: Option<f64>,
    /// scores or label_mean.
    #[arg(long, value_parser = parse_regressor)]
    pub regressor: Option<Regressor>,
    /// Extra slack allowed before a guarantee counts as missed.
    #[arg(long)]
    pub tolerance: Option<f64>,
}

fn parse_projection(s: &str) -> Result<ProjectionMode, String> {
    match s {
        "euclidean" | "euclidean_l1" => Ok(ProjectionMode::Euclidean),
        "rescale" => Ok(ProjectionMode::Rescale),
        _ => Err(format!("unknown projection {s:?}")),
    }
}

fn parse_beta_mode(s: &str) -> Result<BetaMode, String> {
    match s {
        "from_scores" => Ok(BetaMode::FromScores),
        "from_labels" => Ok(BetaMode::FromLabels),
        _ => Err(format!("unknown beta mode {s:?}")),
    }
}

fn parse_regressor(s: &str) -> Result<Regressor, String> {
    match s {
        "scores" => Ok(Regressor::Scores),
        "label_mean" => Ok(Regressor::LabelMean),
        _ => Err(format!("unknown regressor {s:?}")),
    }
}

/// File values overridden by flags.
pub fn merged(args: &ConfigArgs) -> CliResult<ConfigFile> {
    let mut file = match &args.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    macro_rules! take {
        ($($field:ident),*) => { $( if args.$field.is_some() { file.$field = args.$field.clone(); } )* };
    }
    take!(
        notion,
        gamma,
        c,
        projection,
        beta_mode,
        grid_m,
        record_every,
        seed,
        work_cap,
        regressor,
        tolerance
    );
    if let Some(s) = &args.eta {
        file.eta = Some(parse_auto(s)?);
    }
    if let Some(s) = &args.iterations {
        file.iterations = Some(parse_auto(s)?);
    }
    Ok(file)
}

/// Fully resolved settings of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub solver: SolverConfig,
    pub grid_m: u32,
    pub seed: u64,
    pub regressor: Regressor,
    pub tolerance: f64,
    /// The merged file as given, for echoing into the manifest.
    pub echo: ConfigFile,
}

impl RunSettings {
    pub fn resolve(file: ConfigFile) -> CliResult<Self> {
        let notion = file.notion.ok_or_else(|| CliError::input("missing `notion`"))?;
        let gamma = file.gamma.ok_or_else(|| CliError::input("missing `gamma`"))?;
        let c = file.c.ok_or_else(|| CliError::input("missing `C`"))?;
        let mut solver = SolverConfig::new(notion, gamma, c);
        solver.eta = file.eta.and_then(|v| v.value());
        solver.iterations = file.iterations.and_then(|v| v.value());
        solver.projection = file.projection.unwrap_or_default();
        solver.beta_mode = file.beta_mode.unwrap_or_default();
        solver.record_every = file.record_every.unwrap_or(1);
        solver.work_cap = match file.work_cap {
            None => DEFAULT_WORK_CAP,
            Some(w) if w >= 0.0 && w.is_finite() => w as u128,
            Some(w) => {
                return Err(CliError::input(format!(
                    "work_cap must be a nonnegative number, got {w}"
                )))
            }
        };
        solver.validate()?;
        let grid_m = file.grid_m.unwrap_or(DEFAULT_GRID_M);
        if grid_m == 0 {
            return Err(CliError::input("grid_m must be at least 1"));
        }
        let tolerance = file.tolerance.unwrap_or(DEFAULT_TOLERANCE);
        if !(tolerance >= 0.0) {
            return Err(CliError::input("tolerance must be >= 0"));
        }
        Ok(Self {
            solver,
            grid_m,
            seed: file.seed.unwrap_or(0),
            regressor: file.regressor.unwrap_or(Regressor::Scores),
            tolerance,
            echo: file,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_file() {
        let text = r#"{"notion":"fp","gamma":0.01,"C":10,"eta":"auto","T":"auto","projection":"rescale",
            "beta_mode":"from_labels","grid_m":20,"record_every":100,"seed":3,"work_cap":5e9}"#;
        let f: ConfigFile = serde_json::from_str(text).unwrap();
        let s = RunSettings::resolve(f).unwrap();
        assert_eq!(s.solver.iterations, None);
        assert_eq!(s.solver.eta, None);
        assert_eq!(s.solver.projection, ProjectionMode::Rescale);
        assert_eq!(s.solver.beta_mode, BetaMode::FromLabels);
        assert_eq!(s.solver.work_cap, 5_000_000_000);
        assert_eq!(s.grid_m, 20);
    }

    #[test]
    fn explicit_numbers_and_unknown_keys() {
        let f: ConfigFile = serde_json::from_str(r#"{"notion":"sp","gamma":0.1,"C":2,"eta":0.5,"T":40}"#).unwrap();
        let s = RunSettings::resolve(f).unwrap();
        assert_eq!(s.solver.eta, Some(0.5));
        assert_eq!(s.solver.iterations, Some(40));
        assert!(serde_json::from_str::<ConfigFile>(r#"{"gama":0.1}"#).is_err());
        assert!(serde_json::from_str::<ConfigFile>(r#"{"eta":"fast"}"#).is_err());
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"notion":"fp","gamma":0.01,"C":10}"#).unwrap();
        let args = ConfigArgs {
            config: Some(path),
            gamma: Some(0.2),
            iterations: Some("12".into()),
            ..Default::default()
        };
        let s = RunSettings::resolve(merged(&args).unwrap()).unwrap();
        assert_eq!(s.solver.gamma, 0.2);
        assert_eq!(s.solver.c, 10.0);
        assert_eq!(s.solver.iterations, Some(12));
    }
}
