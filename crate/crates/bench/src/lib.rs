//! Shared fixtures for the benchmarks in `benches/`.

use fairpost_core::synth::{self, BiasProfile, SynthSpec};
use fairpost_core::CellDistribution;

/// The 8-cell `two_group_bias` instance with seed 1.
pub fn small_fixture() -> CellDistribution {
    synth::gen_instance(&SynthSpec::new(1, 8, 2, 20, BiasProfile::TwoGroupBias))
        .expect("fixture generates")
        .truth
}

/// A miscalibrated 24-cell instance for calibration.
pub fn miscalibrated_fixture() -> CellDistribution {
    let mut spec = SynthSpec::new(9, 24, 2, 20, BiasProfile::Uniform);
    spec.miscalibration = 0.3;
    synth::gen_instance(&spec).expect("fixture generates").perturbed
}
