//! `mixture.json`: the base rates once, then one λ snapshot per rule.

use std::path::Path;
use std::sync::Arc;

use fairpost_core::{BaseRates, FairnessNotion, MixtureClassifier, ThresholdRule};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const SCHEMA: &str = "fairpost.mixture/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureFile {
    pub schema: String,
    pub notion: FairnessNotion,
    pub groups: Vec<String>,
    /// Shared by every rule.
    pub base: BaseRates,
    pub tiebreak_positive: bool,
    /// Signed `λ` of each rule, in play order.
    pub rules: Vec<Vec<f64>>,
}

impl MixtureFile {
    pub fn from_mixture(mixture: &MixtureClassifier, groups: &[String]) -> CliResult<Self> {
        let first = mixture
            .rules()
            .first()
            .ok_or_else(|| CliError::input("empty mixture"))?;
        Ok(Self {
            schema: SCHEMA.to_string(),
            notion: first.notion,
            groups: groups.to_vec(),
            base: (*first.base).clone(),
            tiebreak_positive: first.tiebreak_positive,
            rules: mixture.rules().iter().map(|r| r.lambda.clone()).collect(),
        })
    }

    pub fn to_mixture(&self) -> MixtureClassifier {
        let base = Arc::new(self.base.clone());
        MixtureClassifier::new(
            self.rules
                .iter()
                .map(|l| {
                    let mut r = ThresholdRule::new(l.clone(), self.notion, base.clone());
                    r.tiebreak_positive = self.tiebreak_positive;
                    r
                })
                .collect(),
        )
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let bytes = std::fs::read(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        let file: MixtureFile = serde_json::from_slice(&bytes).map_err(|e| {
            CliError::input(format!(
                "{}: line {}, column {}: {e}",
                path.display(),
                e.line(),
                e.column()
            ))
        })?;
        if file.schema != SCHEMA {
            return Err(CliError::input(format!(
                "{}: unsupported schema {:?}",
                path.display(),
                file.schema
            )));
        }
        if file.rules.is_empty() {
            return Err(CliError::input(format!("{}: mixture has no rules", path.display())));
        }
        let g = file.groups.len();
        if file.base.beta.len() != g || file.rules.iter().any(|l| l.len() != g) {
            return Err(CliError::input(format!(
                "{}: rule width does not match {g} groups",
                path.display()
            )));
        }
        file.base
            .ensure_notion(file.notion)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        Ok(file)
    }

    /// Fails unless the mixture was built for exactly these groups.
    pub fn check_groups(&self, groups: &[String]) -> CliResult<()> {
        if self.groups != groups {
            return Err(CliError::input(format!(
                "mixture groups {:?} do not match dataset groups {:?}",
                self.groups, groups
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use fairpost_core::synth::{self, BiasProfile, SynthSpec};
    use fairpost_core::{solver, Classifier, FairnessNotion, Regressor, SolverConfig};

    #[test]
    fn json_round_trip_is_bit_exact() {
        let dist = synth::gen_instance(&SynthSpec::new(5, 10, 2, 20, BiasProfile::TwoGroupBias))
            .unwrap()
            .truth;
        for notion in [
            FairnessNotion::Fp,
            FairnessNotion::Fn,
            FairnessNotion::Err,
            FairnessNotion::Sp,
        ] {
            let mut cfg = SolverConfig::new(notion, 0.01, 3.0);
            cfg.iterations = Some(300);
            let run = solver::run(&dist, Regressor::Scores, &cfg).unwrap();
            let file = MixtureFile::from_mixture(&run.mixture, dist.groups().names()).unwrap();
            let back: MixtureFile = serde_json::from_str(&serde_json::to_string_pretty(&file).unwrap()).unwrap();
            let reloaded = back.to_mixture();
            for (a, b) in run.mixture.rules().iter().zip(reloaded.rules()) {
                assert!(a.lambda.iter().zip(&b.lambda).all(|(x, y)| x.to_bits() == y.to_bits()));
            }
            for cell in dist.cells() {
                assert_eq!(
                    run.mixture.positive_prob(cell).to_bits(),
                    reloaded.positive_prob(cell).to_bits()
                );
            }
        }
    }
}
