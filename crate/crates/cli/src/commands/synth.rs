use std::path::PathBuf;

use clap::Args;
use fairpost_core::synth::{self, BiasProfile, SynthSpec};

use crate::dataset;
use crate::error::CliResult;
use crate::manifest::RunManifest;
use crate::output::{self, Outputs};

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(short, long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 8)]
    pub cells: usize,
    /// Groups besides the all-population group.
    #[arg(long, default_value_t = 2)]
    pub groups: usize,
    #[arg(long, default_value_t = 20)]
    pub grid_m: u32,
    /// uniform, two_group_bias or adversarial_overlap.
    #[arg(long, default_value = "uniform")]
    pub profile: BiasProfile,
    /// Magnitude of the score perturbation.
    #[arg(long, default_value_t = 0.0)]
    pub miscalibration: f64,
    /// Also sample this many labelled rows from the perturbed cells into dataset.csv.
    #[arg(long)]
    pub rows: Option<usize>,
}

pub fn run(args: &SynthArgs) -> CliResult<()> {
    let mut spec = SynthSpec::new(args.seed, args.cells, args.groups, args.grid_m, args.profile);
    spec.miscalibration = args.miscalibration;
    let mut manifest = RunManifest::new("synth", serde_json::to_value(&spec)?);
    let inst = manifest.time("generate", || synth::gen_instance(&spec))?;
    let mut outputs = Outputs::new(&args.out)?;
    output::write_json(&outputs.path("cells.json"), &inst.truth)?;
    output::write_json(&outputs.path("cells_perturbed.json"), &inst.perturbed)?;
    if let Some(n) = args.rows {
        let rows = synth::sample_rows(&inst.perturbed, n, args.seed)?;
        dataset::write_csv(&outputs.path("dataset.csv"), &rows, inst.perturbed.groups())?;
    }
    println!("cells={} effective_seed={}", inst.truth.len(), inst.effective_seed);
    manifest.write(&mut outputs, 0)
}
