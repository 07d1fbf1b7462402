use thiserror::Error;

/// Errors raised by the core algorithms.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty dataset")]
    EmptyDataset,

    #[error("row {row}: group vector has length {found}, expected {expected}")]
    InconsistentGroupWidth { row: usize, expected: usize, found: usize },

    #[error("row {row}: score {score} is outside [0, 1]")]
    ScoreOutOfRange { row: usize, score: f64 },

    #[error("row {row}: label {label} is outside [0, 1]")]
    LabelOutOfRange { row: usize, label: f64 },

    #[error("rows mix labelled and unlabelled entries")]
    MixedLabels,

    #[error("grid resolution must be at least 1")]
    InvalidGrid,

    #[error("invalid cell distribution: {0}")]
    InvalidDistribution(String),

    #[error("degenerate label marginal: {0}")]
    DegenerateLabelMarginal(String),

    #[error("label means are required but cell {cell} has none")]
    MissingLabels { cell: usize },

    #[error("base rates were computed for {found} but {expected} was requested")]
    NotionMismatch { expected: String, found: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("budget exceeded: {work} cell-iterations requested, cap is {cap}; lower C or raise the work cap")]
    BudgetExceeded { work: u128, cap: u128 },

    #[error("Lagrangian forms disagree: definition {definition}, expanded {expanded}")]
    InconsistentLagrangian { definition: f64, expanded: f64 },

    #[error("oracle limited to {limit} cells, instance has {cells}")]
    TooManyCells { cells: usize, limit: usize },

    #[error("infeasible instance")]
    Infeasible,

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("multicalibration did not terminate within {rounds} rounds")]
    NonTermination { rounds: u64 },

    #[error("could not generate an instance meeting the bias floor after {attempts} attempts")]
    BiasFloorUnmet { attempts: u32 },
}

pub type Result<T> = std::result::Result<T, Error>;
