//! Fairness-constrained post-processing of regression scores.
//!
//! Scores and group memberships are aggregated into a [`CellDistribution`].
//! [`solver::run`] plays projected-gradient dual dynamics against closed-form
//! best responses and returns a uniform [`MixtureClassifier`]. [`multical`]
//! patches scores toward joint multicalibration, [`oracle`] certifies small
//! instances exactly and [`synth`] generates seeded fixtures.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod metrics;
pub mod model;
pub mod multical;
pub mod oracle;
pub mod solver;
pub mod synth;

pub use error::{Error, Result};
pub use metrics::{BetaMode, RateReport, Regressor};
pub use model::{
    build_cells, BaseRates, Cell, CellDistribution, Classifier, Constant, FairnessNotion, GroupMask, GroupSystem,
    MixtureClassifier, Row, ThresholdRule,
};
pub use solver::{DualState, ProjectionMode, SolveResult, SolverConfig, TheoremBounds, TrajectoryRecord};
