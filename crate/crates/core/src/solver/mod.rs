//! Primal/dual projected-gradient dynamics.
//!
//! Each round the primal player best-responds to `λ^{t−1}` with a
//! [`ThresholdRule`], the dual player takes an additive gradient step on
//! `(λ⁺, λ⁻)` and projects back onto `‖λ‖₁ ≤ C`. The output is the uniform
//! mixture over all rounds' rules.

pub mod lagrangian;
pub mod projection;
pub mod response;
pub mod sampled;

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{self, BetaMode, Regressor};
use crate::model::{BaseRates, CellDistribution, FairnessNotion, MixtureClassifier, ThresholdRule};

pub use lagrangian::{integrands, lagrangian_checked, lagrangian_expanded, lagrangian_value};
pub use projection::{project_l1, ProjectionMode};
pub use response::{best_response, centered_sum};
pub use sampled::sample_size;

/// Default cap on `T · #cells`.
pub const DEFAULT_WORK_CAP: u128 = 5_000_000_000;

/// Nonnegative multipliers for the two one-sided constraints of every group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualState {
    lambda_plus: Vec<f64>,
    lambda_minus: Vec<f64>,
    bound_c: f64,
}

impl DualState {
    pub fn zeros(groups: usize, bound_c: f64) -> Self {
        Self {
            lambda_plus: vec![0.0; groups],
            lambda_minus: vec![0.0; groups],
            bound_c,
        }
    }

    pub fn new(lambda_plus: Vec<f64>, lambda_minus: Vec<f64>, bound_c: f64) -> Result<Self> {
        if lambda_plus.len() != lambda_minus.len() {
            return Err(Error::InvalidConfig("λ⁺ and λ⁻ differ in length".into()));
        }
        if !(bound_c > 0.0) {
            return Err(Error::InvalidConfig(format!("C must be positive, got {bound_c}")));
        }
        if lambda_plus
            .iter()
            .chain(&lambda_minus)
            .any(|&x| !(x >= 0.0) || !x.is_finite())
        {
            return Err(Error::InvalidConfig(
                "dual entries must be finite and nonnegative".into(),
            ));
        }
        Ok(Self {
            lambda_plus,
            lambda_minus,
            bound_c,
        })
    }

    pub fn lambda_plus(&self) -> &[f64] {
        &self.lambda_plus
    }

    pub fn lambda_minus(&self) -> &[f64] {
        &self.lambda_minus
    }

    pub fn bound(&self) -> f64 {
        self.bound_c
    }

    pub fn groups(&self) -> usize {
        self.lambda_plus.len()
    }

    /// `λ_g = λ_g⁺ − λ_g⁻`.
    pub fn signed(&self) -> Vec<f64> {
        self.lambda_plus
            .iter()
            .zip(&self.lambda_minus)
            .map(|(p, m)| p - m)
            .collect()
    }

    pub fn l1(&self) -> f64 {
        self.lambda_plus.iter().chain(&self.lambda_minus).sum()
    }

    /// `(λ⁺, λ⁻)` concatenated.
    pub fn stacked(&self) -> Vec<f64> {
        let mut v = self.lambda_plus.clone();
        v.extend_from_slice(&self.lambda_minus);
        v
    }

    fn set_stacked(&mut self, v: &[f64]) {
        let g = self.groups();
        self.lambda_plus.copy_from_slice(&v[..g]);
        self.lambda_minus.copy_from_slice(&v[g..]);
    }

    /// Additive step `λ± ← max(0, λ± + η·grad±)` followed by projection.
    pub fn step(&mut self, eta: f64, grad_plus: &[f64], grad_minus: &[f64], mode: ProjectionMode) {
        let mut v: Vec<f64> = self
            .lambda_plus
            .iter()
            .zip(grad_plus)
            .chain(self.lambda_minus.iter().zip(grad_minus))
            .map(|(l, d)| (l + eta * d).max(0.0))
            .collect();
        project_l1(&mut v, self.bound_c, mode);
        self.set_stacked(&v);
    }

    /// Projects the current state onto the ball.
    pub fn project(&mut self, mode: ProjectionMode) {
        let mut v = self.stacked();
        project_l1(&mut v, self.bound_c, mode);
        self.set_stacked(&v);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub notion: FairnessNotion,
    pub gamma: f64,
    #[serde(rename = "C")]
    pub c: f64,
    /// Step size; `None` selects `C / √(2|G|T)`.
    pub eta: Option<f64>,
    /// Number of rounds; `None` selects [`iteration_budget`].
    #[serde(rename = "T")]
    pub iterations: Option<u64>,
    pub projection: ProjectionMode,
    pub beta_mode: BetaMode,
    pub record_every: u64,
    pub work_cap: u128,
    /// Compute the duality-gap estimate at every record.
    pub track_gap: bool,
}

impl SolverConfig {
    pub fn new(notion: FairnessNotion, gamma: f64, c: f64) -> Self {
        Self {
            notion,
            gamma,
            c,
            eta: None,
            iterations: None,
            projection: ProjectionMode::Euclidean,
            beta_mode: BetaMode::FromScores,
            record_every: 1,
            work_cap: DEFAULT_WORK_CAP,
            track_gap: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "gamma must be finite and >= 0, got {}",
                self.gamma
            )));
        }
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "C must be finite and > 0, got {}",
                self.c
            )));
        }
        if let Some(eta) = self.eta {
            if !(eta > 0.0) || !eta.is_finite() {
                return Err(Error::InvalidConfig(format!("eta must be finite and > 0, got {eta}")));
            }
        }
        if self.iterations == Some(0) {
            return Err(Error::InvalidConfig("T must be at least 1".into()));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidConfig("record_every must be at least 1".into()));
        }
        Ok(())
    }

    pub fn resolved_iterations(&self, groups: usize) -> u64 {
        self.iterations.unwrap_or_else(|| iteration_budget(self.c, groups))
    }

    pub fn resolved_eta(&self, groups: usize, iterations: u64) -> f64 {
        self.eta
            .unwrap_or_else(|| self.c / (2.0 * groups as f64 * iterations as f64).sqrt())
    }
}

/// `⌈¼ C² (C² + 4|G|)²⌉`.
pub fn iteration_budget(c: f64, groups: usize) -> u64 {
    let c2 = c * c;
    let inner = c2 + 4.0 * groups as f64;
    (0.25 * c2 * inner * inner).ceil() as u64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub t: u64,
    /// Surrogate error of the round's rule.
    pub err_hat: f64,
    /// `max_g |lhs_g|` of the round's rule.
    pub max_violation_hat: f64,
    pub lambda_l1: f64,
    /// Surrogate error of the mixture over rounds `1..=t`.
    pub mixture_err_hat: f64,
    pub mixture_max_violation_hat: f64,
    pub duality_gap_estimate: Option<f64>,
}

/// Additive slacks promised for the averaged play.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremBounds {
    /// Equilibrium approximation `ν = (C² + 4|G|) / (2√T)`; equals `1/C` at the default horizon.
    pub approximation: f64,
    /// `err(h̄) ≤ OPT + err_slack`.
    pub err_slack: f64,
    /// `|lhs_g| ≤ γ + violation_slack`, with `1/C + 2/C²`.
    pub violation_slack: f64,
    /// `(1 + 2ν) / C` at the run's own `ν`.
    pub violation_slack_alt: f64,
    /// Sampling accuracy ε of the estimated-rate variant.
    pub epsilon: Option<f64>,
}

impl TheoremBounds {
    pub fn exact(c: f64, groups: usize, iterations: u64) -> Self {
        let nu = (c * c + 4.0 * groups as f64) / (2.0 * (iterations as f64).sqrt());
        Self {
            approximation: nu,
            err_slack: 2.0 / c,
            violation_slack: 1.0 / c + 2.0 / (c * c),
            violation_slack_alt: (1.0 + 2.0 * nu) / c,
            epsilon: None,
        }
    }

    pub fn sampled(c: f64, groups: usize, iterations: u64, epsilon: f64) -> Self {
        let mut b = Self::exact(c, groups, iterations);
        b.err_slack += 8.0 * epsilon;
        b.violation_slack += 8.0 * epsilon / c;
        b.violation_slack_alt += 8.0 * epsilon / c;
        b.epsilon = Some(epsilon);
        b
    }
}

/// Estimation error of one round of the sampled variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationRecord {
    pub t: u64,
    /// `|ρ̂_g − ρ_g|` per group.
    pub group_deviation: Vec<f64>,
    /// `|ρ̂₀ − ρ₀|`.
    pub aggregate_deviation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub mixture: MixtureClassifier,
    pub final_dual: DualState,
    pub trajectory: Vec<TrajectoryRecord>,
    pub theorem_bounds: TheoremBounds,
    pub base: Arc<BaseRates>,
    pub iterations: u64,
    pub eta: f64,
    /// Per-round sample size of the sampled variant.
    pub sample_size: Option<u64>,
    pub estimation: Vec<EstimationRecord>,
}

/// Gradients of the Lagrangian in `λ⁺` and `λ⁻` at the classifier `probs`.
pub fn dual_gradient(
    probs: &[f64],
    dist: &CellDistribution,
    regressor: Regressor,
    base: &BaseRates,
    gamma: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let lhs = metrics::constraint_lhs_all(probs, dist, regressor, base)?;
    Ok(gradient_from_lhs(&lhs, gamma))
}

fn gradient_from_lhs(lhs: &[f64], gamma: f64) -> (Vec<f64>, Vec<f64>) {
    let plus = lhs.iter().map(|&v| v - gamma).collect();
    let minus = lhs.iter().map(|&v| -v - gamma).collect();
    (plus, minus)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Runs the dynamics on exact population rates.
pub fn run(dist: &CellDistribution, regressor: Regressor, config: &SolverConfig) -> Result<SolveResult> {
    Dynamics::new(dist, regressor, config)?.run(None)
}

/// Runs the dynamics with each round's rates estimated from a fresh sample of size
/// [`sample_size`]`(T, |G|, ε, δ)` drawn from `population`.
pub fn run_sampled(
    population: &CellDistribution,
    regressor: Regressor,
    config: &SolverConfig,
    sampler_seed: u64,
    epsilon: f64,
    delta: f64,
) -> Result<SolveResult> {
    for (name, v) in [("epsilon", epsilon), ("delta", delta)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::InvalidConfig(format!("{name} must lie in (0, 1), got {v}")));
        }
    }
    let dynamics = Dynamics::new(population, regressor, config)?;
    let m = sample_size(dynamics.iterations, population.group_count(), epsilon, delta);
    let sampler = Sampler {
        rng: ChaCha8Rng::seed_from_u64(sampler_seed),
        m,
    };
    let mut result = dynamics.run(Some(sampler))?;
    result.theorem_bounds = TheoremBounds::sampled(config.c, population.group_count(), result.iterations, epsilon);
    result.sample_size = Some(m);
    Ok(result)
}

struct Sampler {
    rng: ChaCha8Rng,
    m: u64,
}

struct Dynamics<'a> {
    dist: &'a CellDistribution,
    config: &'a SolverConfig,
    f: Vec<f64>,
    masses: Vec<f64>,
    base: Arc<BaseRates>,
    iterations: u64,
    eta: f64,
}

impl<'a> Dynamics<'a> {
    fn new(dist: &'a CellDistribution, regressor: Regressor, config: &'a SolverConfig) -> Result<Self> {
        config.validate()?;
        let groups = dist.group_count();
        let iterations = config.resolved_iterations(groups);
        let work = iterations as u128 * dist.len() as u128;
        if work > config.work_cap {
            return Err(Error::BudgetExceeded {
                work,
                cap: config.work_cap,
            });
        }
        let base = Arc::new(metrics::base_rates(dist, config.notion, config.beta_mode)?);
        Ok(Self {
            dist,
            config,
            f: metrics::regressor_values(dist, regressor)?,
            masses: dist.cells().iter().map(|c| c.mass).collect(),
            base,
            iterations,
            eta: config.resolved_eta(groups, iterations),
        })
    }

    fn lhs(&self, probs: &[f64], masses: &[f64]) -> (Vec<f64>, Vec<f64>, f64) {
        let (rho, rho_0) = metrics::group_rates(probs, masses, self.dist, &self.f, self.base.notion);
        let lhs = rho.iter().zip(&self.base.beta).map(|(&r, &b)| r - b * rho_0).collect();
        (lhs, rho, rho_0)
    }

    fn err(&self, probs: &[f64]) -> f64 {
        self.masses
            .iter()
            .zip(probs)
            .zip(&self.f)
            .map(|((&m, &p), &fv)| m * metrics::rate_term(FairnessNotion::Err, p, fv))
            .sum()
    }

    fn run(self, mut sampler: Option<Sampler>) -> Result<SolveResult> {
        let cfg = self.config;
        let groups = self.dist.group_count();
        let n = self.dist.len();
        let total = self.iterations;
        let mut dual = DualState::zeros(groups, cfg.c);
        let mut mixture = MixtureClassifier::default();
        let mut trajectory = Vec::new();
        let mut estimation = Vec::new();
        let mut positives = vec![0u64; n];
        let mut dual_sum = vec![0.0; groups];
        let mut probs = vec![0.0; n];

        for t in 1..=total {
            let lambda = dual.signed();
            for (s, l) in dual_sum.iter_mut().zip(&lambda) {
                *s += l;
            }
            let rule = ThresholdRule::new(lambda, cfg.notion, Arc::clone(&self.base));
            for ((p, c), count) in probs.iter_mut().zip(self.dist.cells()).zip(positives.iter_mut()) {
                let bit = rule.decide(c);
                *p = if bit { 1.0 } else { 0.0 };
                *count += bit as u64;
            }

            let (lhs, rho, rho_0) = self.lhs(&probs, &self.masses);
            let step_lhs = match sampler.as_mut() {
                None => lhs.clone(),
                Some(s) => {
                    let counts = sampled::multinomial(&mut s.rng, s.m, &self.masses);
                    let empirical: Vec<f64> = counts.iter().map(|&k| k as f64 / s.m as f64).collect();
                    let (est_lhs, est_rho, est_rho_0) = self.lhs(&probs, &empirical);
                    estimation.push(EstimationRecord {
                        t,
                        group_deviation: est_rho.iter().zip(&rho).map(|(a, b)| (a - b).abs()).collect(),
                        aggregate_deviation: (est_rho_0 - rho_0).abs(),
                    });
                    est_lhs
                }
            };
            let (grad_plus, grad_minus) = gradient_from_lhs(&step_lhs, cfg.gamma);
            dual.step(self.eta, &grad_plus, &grad_minus, cfg.projection);

            if t % cfg.record_every == 0 || t == total {
                let mix_probs: Vec<f64> = positives.iter().map(|&k| k as f64 / t as f64).collect();
                let (mix_lhs, _, _) = self.lhs(&mix_probs, &self.masses);
                let mix_err = self.err(&mix_probs);
                let gap = cfg.track_gap.then(|| {
                    let avg: Vec<f64> = dual_sum.iter().map(|s| s / t as f64).collect();
                    self.duality_gap(&mix_lhs, mix_err, &avg)
                });
                trajectory.push(TrajectoryRecord {
                    t,
                    err_hat: self.err(&probs),
                    max_violation_hat: max_abs(&lhs),
                    lambda_l1: dual.l1(),
                    mixture_err_hat: mix_err,
                    mixture_max_violation_hat: max_abs(&mix_lhs),
                    duality_gap_estimate: gap,
                });
            }
            mixture.push(rule);
        }

        Ok(SolveResult {
            mixture,
            final_dual: dual,
            trajectory,
            theorem_bounds: TheoremBounds::exact(cfg.c, groups, total),
            base: self.base,
            iterations: total,
            eta: self.eta,
            sample_size: None,
            estimation,
        })
    }

    /// `max_{λ ∈ Λ} L(h̄, λ) − min_h L(h, λ̄)`.
    fn duality_gap(&self, mix_lhs: &[f64], mix_err: f64, avg_lambda: &[f64]) -> f64 {
        let gamma = self.config.gamma;
        // L(h̄, ·) is linear in λ, so its maximum over the ball sits at 0 or at some C·e_i.
        let worst = mix_lhs
            .iter()
            .flat_map(|&v| [v - gamma, -v - gamma])
            .fold(0.0, f64::max);
        let upper = mix_err + self.config.c * worst;

        // At λ̄ the pointwise minimizer attains min_h; λ̄ signed has ‖λ̄‖₁ ≥ Σ|λ̄_g|, use the latter.
        let penalty = gamma * avg_lambda.iter().map(|l| l.abs()).sum::<f64>();
        let lower: f64 = self
            .dist
            .cells()
            .iter()
            .zip(&self.f)
            .map(|(c, &fv)| {
                let s = centered_sum(avg_lambda, &c.groups, &self.base);
                let (i0, i1) = integrands(s, fv, self.base.notion);
                c.mass * i0.min(i1)
            })
            .sum::<f64>()
            - penalty;
        upper - lower
    }
}
