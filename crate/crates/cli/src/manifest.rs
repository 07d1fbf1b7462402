//! `manifest.json`, written last by every command.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use fairpost_core::TheoremBounds;
use serde::Serialize;

use crate::error::CliResult;
use crate::output::{self, Outputs};

pub const MANIFEST_SCHEMA: &str = "fairpost.manifest/1";

#[derive(Debug, Clone, Serialize)]
pub struct InputRecord {
    pub path: String,
    pub sha256: String,
    pub cells: usize,
    pub rows: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Versions {
    pub fairpost: &'static str,
    pub manifest_schema: &'static str,
    pub mixture_schema: &'static str,
    pub trajectory_schema: u32,
}

impl Default for Versions {
    fn default() -> Self {
        Self {
            fairpost: env!("CARGO_PKG_VERSION"),
            manifest_schema: MANIFEST_SCHEMA,
            mixture_schema: crate::mixture_file::SCHEMA,
            trajectory_schema: output::TRAJECTORY_SCHEMA,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub inputs: Vec<InputRecord>,
    pub versions: Versions,
    /// Wall-clock seconds per phase.
    pub timings: BTreeMap<String, f64>,
    pub theorem_bounds: Option<TheoremBounds>,
    pub outputs: Vec<String>,
    pub exit_code: u8,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        Self {
            command: command.to_string(),
            config,
            inputs: Vec::new(),
            versions: Versions::default(),
            timings: BTreeMap::new(),
            theorem_bounds: None,
            outputs: Vec::new(),
            exit_code: 0,
        }
    }

    /// Runs `f` and records its duration under `phase`.
    pub fn time<T>(&mut self, phase: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let value = f();
        self.timings.insert(phase.to_string(), start.elapsed().as_secs_f64());
        value
    }

    pub fn write(mut self, outputs: &mut Outputs, exit_code: u8) -> CliResult<()> {
        let path = outputs.path("manifest.json");
        self.outputs = outputs.files().to_vec();
        self.exit_code = exit_code;
        output::write_json(&path, &self)
    }
}

pub fn input_record(path: &Path, dataset: &crate::dataset::Dataset) -> InputRecord {
    InputRecord {
        path: path.display().to_string(),
        sha256: dataset.sha256.clone(),
        cells: dataset.dist.len(),
        rows: dataset.rows,
    }
}
