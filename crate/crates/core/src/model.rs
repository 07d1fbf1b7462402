//! Cell-aggregated distributions and the classifiers evaluated over them.
//!
//! Every quantity the solver, metrics and calibration code touches depends on
//! an individual only through its score `f(x)` and its group-membership
//! vector, so inputs are coarsened to `(score level, group mask)` cells that
//! carry a probability mass and, optionally, the mean label inside the cell.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::response;

/// Tolerance on `Σ mass = 1` accepted by [`CellDistribution::new`].
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Grid snapping: nearest point of `{0, 1/m, ..., 1}`, half values round up.
///
/// The small offset absorbs representation error in inputs such as `0.05`
/// whose product with `m` lands a few ulps below the half point.
pub fn snap_to_grid(value: f64, grid_m: u32) -> u32 {
    let scaled = value * grid_m as f64;
    let level = (scaled + 0.5 + 1e-9).floor();
    level.clamp(0.0, grid_m as f64) as u32
}

/// Ordered, uniquely named collection of groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupSystem {
    names: Vec<String>,
    all_group: Option<usize>,
}

impl GroupSystem {
    pub fn new(names: Vec<String>, all_group: Option<usize>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::InvalidDistribution("at least one group is required".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for name in &names {
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidDistribution(format!("duplicate group name {name:?}")));
            }
        }
        if let Some(idx) = all_group {
            if idx >= names.len() {
                return Err(Error::InvalidDistribution(format!(
                    "all-group index {idx} out of range"
                )));
            }
        }
        Ok(Self { names, all_group })
    }

    /// Group system whose first group is the all-ones group `I`, followed by `others`.
    pub fn with_all_group(others: impl IntoIterator<Item = String>) -> Result<Self> {
        let mut names = vec!["I".to_string()];
        names.extend(others);
        Self::new(names, Some(0))
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn count(&self) -> usize {
        self.names.len()
    }

    pub fn includes_all_group(&self) -> bool {
        self.all_group.is_some()
    }

    pub fn all_group(&self) -> Option<usize> {
        self.all_group
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum MaskBits {
    Inline(u64),
    Wide(Box<[u64]>),
}

/// Group-membership bit vector `x_G`. Up to 64 groups fit in one word.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroupMask {
    width: usize,
    bits: MaskBits,
}

impl GroupMask {
    pub fn empty(width: usize) -> Self {
        let bits = if width <= 64 {
            MaskBits::Inline(0)
        } else {
            MaskBits::Wide(vec![0u64; width.div_ceil(64)].into_boxed_slice())
        };
        Self { width, bits }
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut mask = Self::empty(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                mask.set(i);
            }
        }
        mask
    }

    /// Builds a mask of `width` bits from the low bits of `word` (bit `i` is group `i`).
    pub fn from_word(word: u64, width: usize) -> Self {
        assert!(width <= 64, "from_word supports at most 64 groups");
        let masked = if width == 64 {
            word
        } else {
            word & ((1u64 << width) - 1)
        };
        Self {
            width,
            bits: MaskBits::Inline(masked),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.width);
        match &self.bits {
            MaskBits::Inline(w) => (w >> i) & 1 == 1,
            MaskBits::Wide(ws) => (ws[i / 64] >> (i % 64)) & 1 == 1,
        }
    }

    pub fn set(&mut self, i: usize) {
        assert!(i < self.width, "group index {i} out of range for width {}", self.width);
        match &mut self.bits {
            MaskBits::Inline(w) => *w |= 1 << i,
            MaskBits::Wide(ws) => ws[i / 64] |= 1 << (i % 64),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.width).map(move |i| self.get(i))
    }

    /// Indices of the groups this mask belongs to.
    pub fn members(&self) -> Vec<usize> {
        (0..self.width).filter(|&i| self.get(i)).collect()
    }
}

impl fmt::Display for GroupMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for GroupMask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::InvalidDistribution(format!("bad mask character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_bools(&bits))
    }
}

impl Serialize for GroupMask {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for GroupMask {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One `(score, groups)` cell with its probability mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    /// Grid index `k` of the score `k/m`.
    pub level: u32,
    pub score: f64,
    pub groups: GroupMask,
    pub mass: f64,
    /// `E[y | cell]` when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_mean: Option<f64>,
}

impl Cell {
    pub fn new(level: u32, grid_m: u32, groups: GroupMask, mass: f64, label_mean: Option<f64>) -> Self {
        Self {
            level,
            score: level as f64 / grid_m as f64,
            groups,
            mass,
            label_mean,
        }
    }

    pub fn key(&self) -> (u32, &GroupMask) {
        (self.level, &self.groups)
    }

    pub fn in_group(&self, g: usize) -> bool {
        self.groups.get(g)
    }
}

/// A probability distribution over `(score, groups)` cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution")]
pub struct CellDistribution {
    grid_m: u32,
    groups: GroupSystem,
    cells: Vec<Cell>,
}

#[derive(Deserialize)]
struct RawDistribution {
    grid_m: u32,
    groups: GroupSystem,
    cells: Vec<Cell>,
}

impl TryFrom<RawDistribution> for CellDistribution {
    type Error = Error;

    fn try_from(raw: RawDistribution) -> Result<Self> {
        CellDistribution::new(raw.grid_m, raw.groups, raw.cells)
    }
}

impl CellDistribution {
    /// Validates and wraps a list of cells. Scores are recomputed from levels.
    pub fn new(grid_m: u32, groups: GroupSystem, mut cells: Vec<Cell>) -> Result<Self> {
        if grid_m == 0 {
            return Err(Error::InvalidGrid);
        }
        if cells.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let width = groups.count();
        let mut keys = std::collections::HashSet::with_capacity(cells.len());
        let mut total = 0.0;
        for (i, cell) in cells.iter_mut().enumerate() {
            if cell.level > grid_m {
                return Err(Error::InvalidDistribution(format!(
                    "cell {i}: level {} exceeds grid {grid_m}",
                    cell.level
                )));
            }
            cell.score = cell.level as f64 / grid_m as f64;
            if cell.groups.width() != width {
                return Err(Error::InconsistentGroupWidth {
                    row: i,
                    expected: width,
                    found: cell.groups.width(),
                });
            }
            if !(cell.mass >= 0.0) || !cell.mass.is_finite() {
                return Err(Error::InvalidDistribution(format!("cell {i}: negative mass")));
            }
            if let Some(q) = cell.label_mean {
                if !(0.0..=1.0).contains(&q) {
                    return Err(Error::InvalidDistribution(format!(
                        "cell {i}: label mean {q} outside [0, 1]"
                    )));
                }
            }
            if let Some(all) = groups.all_group() {
                if !cell.groups.get(all) {
                    return Err(Error::InvalidDistribution(format!(
                        "cell {i} is not a member of the all-group"
                    )));
                }
            }
            if !keys.insert((cell.level, cell.groups.clone())) {
                return Err(Error::InvalidDistribution(format!(
                    "duplicate cell key (level {}, groups {})",
                    cell.level, cell.groups
                )));
            }
            total += cell.mass;
        }
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("masses sum to {total}, not 1")));
        }
        Ok(Self { grid_m, groups, cells })
    }

    pub fn grid_m(&self) -> u32 {
        self.grid_m
    }

    pub fn groups(&self) -> &GroupSystem {
        &self.groups
    }

    pub fn group_count(&self) -> usize {
        self.groups.count()
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn has_labels(&self) -> bool {
        self.cells.iter().all(|c| c.label_mean.is_some())
    }

    /// Label means of every cell, or the first cell lacking one.
    pub fn label_means(&self) -> Result<Vec<f64>> {
        self.cells
            .iter()
            .enumerate()
            .map(|(i, c)| c.label_mean.ok_or(Error::MissingLabels { cell: i }))
            .collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.cells.iter().map(|c| c.mass).sum()
    }

    /// Same cells with each score replaced by the label mean snapped to the grid.
    pub fn with_scores_from_labels(&self) -> Result<Self> {
        let mut merged: Vec<Cell> = Vec::new();
        let mut index: HashMap<(u32, GroupMask), usize> = HashMap::new();
        for (i, c) in self.cells.iter().enumerate() {
            let q = c.label_mean.ok_or(Error::MissingLabels { cell: i })?;
            let level = snap_to_grid(q, self.grid_m);
            match index.get(&(level, c.groups.clone())) {
                Some(&j) => {
                    let other = &mut merged[j];
                    let mass = other.mass + c.mass;
                    let mean = if mass > 0.0 {
                        (other.label_mean.unwrap_or(0.0) * other.mass + q * c.mass) / mass
                    } else {
                        q
                    };
                    other.mass = mass;
                    other.label_mean = Some(mean);
                }
                None => {
                    index.insert((level, c.groups.clone()), merged.len());
                    merged.push(Cell::new(level, self.grid_m, c.groups.clone(), c.mass, Some(q)));
                }
            }
        }
        Self::new(self.grid_m, self.groups.clone(), merged)
    }
}

/// One observation before aggregation.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub score: f64,
    pub groups: GroupMask,
    pub label: Option<f64>,
}

/// Aggregates rows into cells on the grid `{0, 1/m, ..., 1}`.
///
/// Output cells are sorted by `(level, mask)` so the result does not depend on
/// the order of `rows`.
pub fn build_cells(rows: &[Row], grid_m: u32, groups: GroupSystem) -> Result<CellDistribution> {
    if grid_m == 0 {
        return Err(Error::InvalidGrid);
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let width = groups.count();
    let labelled = rows[0].label.is_some();
    // (count, label sum)
    let mut buckets: HashMap<(u32, GroupMask), (u64, f64)> = HashMap::new();
    for (i, row) in rows.iter().enumerate() {
        if !(0.0..=1.0).contains(&row.score) {
            return Err(Error::ScoreOutOfRange {
                row: i,
                score: row.score,
            });
        }
        if row.groups.width() != width {
            return Err(Error::InconsistentGroupWidth {
                row: i,
                expected: width,
                found: row.groups.width(),
            });
        }
        if row.label.is_some() != labelled {
            return Err(Error::MixedLabels);
        }
        if let Some(y) = row.label {
            if !(0.0..=1.0).contains(&y) {
                return Err(Error::LabelOutOfRange { row: i, label: y });
            }
        }
        let level = snap_to_grid(row.score, grid_m);
        let entry = buckets.entry((level, row.groups.clone())).or_insert((0, 0.0));
        entry.0 += 1;
        entry.1 += row.label.unwrap_or(0.0);
    }
    let n = rows.len() as f64;
    let mut keys: Vec<_> = buckets.into_iter().collect();
    keys.sort_by(|a, b| a.0.cmp(&b.0));
    let cells = keys
        .into_iter()
        .map(|((level, mask), (count, label_sum))| {
            let label_mean = labelled.then(|| label_sum / count as f64);
            Cell::new(level, grid_m, mask, count as f64 / n, label_mean)
        })
        .collect();
    CellDistribution::new(grid_m, groups, cells)
}

/// The group-fairness constraint family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FairnessNotion {
    /// False-positive rate parity.
    Fp,
    /// False-negative rate parity.
    Fn,
    /// Error rate parity.
    Err,
    /// Statistical parity.
    Sp,
}

impl FairnessNotion {
    pub const ALL: [FairnessNotion; 4] = [Self::Fp, Self::Fn, Self::Err, Self::Sp];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Fp => "fp",
            Self::Fn => "fn",
            Self::Err => "err",
            Self::Sp => "sp",
        }
    }
}

impl fmt::Display for FairnessNotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FairnessNotion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fp" => Ok(Self::Fp),
            "fn" => Ok(Self::Fn),
            "err" | "error" => Ok(Self::Err),
            "sp" => Ok(Self::Sp),
            other => Err(Error::InvalidConfig(format!("unknown fairness notion {other:?}"))),
        }
    }
}

/// Per-group centering constants and reporting weights for one notion.
///
/// `beta` is what the constraints and best responses subtract from each group
/// indicator: `Pr[g | y=0]` for FP, `Pr[g | y=1]` for FN and `Pr[g]` for ERR and SP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseRates {
    pub notion: FairnessNotion,
    pub beta: Vec<f64>,
    pub w: Vec<f64>,
}

impl BaseRates {
    pub fn ensure_notion(&self, notion: FairnessNotion) -> Result<()> {
        if self.notion != notion {
            return Err(Error::NotionMismatch {
                expected: notion.to_string(),
                found: self.notion.to_string(),
            });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }
}

/// Anything that assigns a probability of predicting 1 to a cell.
pub trait Classifier {
    fn positive_prob(&self, cell: &Cell) -> f64;

    fn probs(&self, dist: &CellDistribution) -> Vec<f64> {
        dist.cells().iter().map(|c| self.positive_prob(c)).collect()
    }
}

/// Constant classifier, `h ≡ 0` or `h ≡ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Constant(pub bool);

impl Classifier for Constant {
    fn positive_prob(&self, _cell: &Cell) -> f64 {
        if self.0 {
            1.0
        } else {
            0.0
        }
    }
}

/// Deterministic closed-form best response to a dual snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdRule {
    pub lambda: Vec<f64>,
    pub notion: FairnessNotion,
    pub base: Arc<BaseRates>,
    pub tiebreak_positive: bool,
}

impl ThresholdRule {
    pub fn new(lambda: Vec<f64>, notion: FairnessNotion, base: Arc<BaseRates>) -> Self {
        Self {
            lambda,
            notion,
            base,
            tiebreak_positive: true,
        }
    }

    pub fn decide(&self, cell: &Cell) -> bool {
        self.decide_at(&cell.groups, cell.score)
    }

    pub fn decide_at(&self, groups: &GroupMask, score: f64) -> bool {
        response::best_response_with_tiebreak(
            &self.lambda,
            groups,
            score,
            self.notion,
            &self.base,
            self.tiebreak_positive,
        )
    }
}

impl Classifier for ThresholdRule {
    fn positive_prob(&self, cell: &Cell) -> f64 {
        if self.decide(cell) {
            1.0
        } else {
            0.0
        }
    }
}

/// Uniform mixture over threshold rules.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MixtureClassifier {
    rules: Vec<ThresholdRule>,
}

impl MixtureClassifier {
    pub fn new(rules: Vec<ThresholdRule>) -> Self {
        Self { rules }
    }

    pub fn rules(&self) -> &[ThresholdRule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn push(&mut self, rule: ThresholdRule) {
        self.rules.push(rule);
    }

    /// Mixture over the rules of `self` followed by those of `other`.
    pub fn concat(&self, other: &MixtureClassifier) -> MixtureClassifier {
        let mut rules = self.rules.clone();
        rules.extend_from_slice(&other.rules);
        Self { rules }
    }

    pub fn positive_count(&self, cell: &Cell) -> usize {
        self.rules.iter().filter(|r| r.decide(cell)).count()
    }
}

impl Classifier for MixtureClassifier {
    /// # Panics
    /// Panics on an empty mixture.
    fn positive_prob(&self, cell: &Cell) -> f64 {
        assert!(!self.rules.is_empty(), "positive_prob on an empty mixture");
        self.positive_count(cell) as f64 / self.rules.len() as f64
    }
}
