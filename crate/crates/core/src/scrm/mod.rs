//! Triplet-set scoring with tolerance tiers.
//!
//! Each predicted triplet is judged against each ground-truth triplet: the
//! entity pair by edit distance between canonical keys, the value by relative
//! error. A pair is compatible under a tolerance tier when both measures are
//! within the tier's budgets. Per image, compatible pairs are matched one to
//! one and scored as an intersection over union; across a dataset the share of
//! images above an IoU threshold gives Precision@t, and the mean over
//! `t = 0.50, 0.55, ..., 0.95` gives mPrecision.

mod edit;
mod matching;
mod report;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lct::Cell;
use crate::triplet::{canonical_key, normalize_entity, Triplet, TripletSet};

pub use edit::levenshtein;
pub use matching::maximum_matching;
pub use report::{
    dataset_report, mprecision_thresholds, render_table, ScrmReport, ThresholdPrecision, TierReport,
    DEFAULT_THRESHOLDS, REPORT_SCHEMA_VERSION,
};

/// Relative slack under which two numbers count as equal, scaled by
/// `max(1, |gt|)`.
pub const EQUALITY_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScrmError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid tolerance {name:?}: thresholds must be finite and non-negative")]
    InvalidTolerance { name: String },
    #[error("unknown tolerance {0:?} (expected strict, slight or high)")]
    UnknownTolerance(String),
    #[error("invalid IoU threshold {0}")]
    InvalidThreshold(f64),
    #[error("{0} image ids for {1} images")]
    IdCount(usize, usize),
}

/// A named pair of budgets: maximum entity edit distance and maximum value
/// relative error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToleranceLevel {
    pub name: String,
    pub j_thr: u32,
    pub e_thr: f64,
}

impl ToleranceLevel {
    pub fn new(name: impl Into<String>, j_thr: u32, e_thr: f64) -> Result<Self, ScrmError> {
        let name = name.into();
        if !e_thr.is_finite() || e_thr < 0.0 {
            return Err(ScrmError::InvalidTolerance { name });
        }
        Ok(ToleranceLevel { name, j_thr, e_thr })
    }

    /// Exact entities, exact values.
    pub fn strict() -> Self {
        ToleranceLevel { name: "strict".into(), j_thr: 0, e_thr: 0.0 }
    }

    /// Up to 2 edits, 5% relative error.
    pub fn slight() -> Self {
        ToleranceLevel { name: "slight".into(), j_thr: 2, e_thr: 0.05 }
    }

    /// Up to 5 edits, 10% relative error.
    pub fn high() -> Self {
        ToleranceLevel { name: "high".into(), j_thr: 5, e_thr: 0.1 }
    }

    /// The three predefined tiers, tightest first.
    pub fn standard() -> Vec<ToleranceLevel> {
        vec![Self::strict(), Self::slight(), Self::high()]
    }

    /// Parses a comma-separated list of predefined tier names.
    pub fn parse_list(list: &str) -> Result<Vec<ToleranceLevel>, ScrmError> {
        list.split(',').map(|s| s.trim().parse()).collect()
    }
}

impl FromStr for ToleranceLevel {
    type Err = ScrmError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "strict" => Ok(Self::strict()),
            "slight" => Ok(Self::slight()),
            "high" => Ok(Self::high()),
            _ => Err(ScrmError::UnknownTolerance(s.to_string())),
        }
    }
}

/// How per-pair compatibilities become an image score.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    /// One-to-one maximum matching; IoU always lies in `[0, 1]`.
    #[default]
    Matched,
    /// Raw count of compatible pairs over `P + Q - count`. A prediction that
    /// fits several ground-truth triplets is counted for each, so the ratio
    /// can leave `[0, 1]`.
    PaperLiteral,
}

impl FromStr for MatchMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "matched" => Ok(MatchMode::Matched),
            "paper-literal" | "paper_literal" => Ok(MatchMode::PaperLiteral),
            _ => Err(format!("unknown mode {s:?} (expected matched or paper-literal)")),
        }
    }
}

impl fmt::Display for MatchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatchMode::Matched => "matched",
            MatchMode::PaperLiteral => "paper-literal",
        })
    }
}

/// How the entity distance of a pair is measured.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityStrategy {
    /// One edit distance between the two canonical keys.
    #[default]
    JoinedKey,
    /// Normalize and sort each side's entities, then take the largest edit
    /// distance between same-position entities.
    PerEntityMax,
}

/// The verdict for one prediction/ground-truth pair under one tier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairJudgment {
    /// Entity edit distance.
    pub j: usize,
    /// Value relative error; infinite when the values cannot be compared.
    pub e: f64,
    /// Whether the pair is compatible under the tier.
    pub l: bool,
}

/// How two values compare, independent of any tier.
#[derive(Debug, Clone, Copy, PartialEq)]
enum ValueDiff {
    /// Both numeric: relative error (0 when within [`EQUALITY_EPSILON`]).
    Relative(f64),
    /// Both non-numeric: edit distance of the normalized raw strings.
    Textual(usize),
    /// One numeric, one not.
    Incomparable,
}

impl ValueDiff {
    fn between(pred: &Cell, gt: &Cell) -> Self {
        match (pred.numeric(), gt.numeric()) {
            (Some(p), Some(g)) => {
                let diff = (p - g).abs();
                if diff <= EQUALITY_EPSILON * g.abs().max(1.0) {
                    ValueDiff::Relative(0.0)
                } else if g == 0.0 {
                    ValueDiff::Relative(f64::INFINITY)
                } else {
                    ValueDiff::Relative(diff / g.abs())
                }
            }
            (None, None) => ValueDiff::Textual(levenshtein(&normalize_entity(pred.raw()), &normalize_entity(gt.raw()))),
            _ => ValueDiff::Incomparable,
        }
    }

    fn relative_error(self, tol: &ToleranceLevel) -> f64 {
        match self {
            ValueDiff::Relative(e) => e,
            ValueDiff::Textual(d) if d <= tol.j_thr as usize => 0.0,
            _ => f64::INFINITY,
        }
    }
}

/// Tier-independent measurements of one pair.
#[derive(Debug, Clone, Copy)]
struct PairFeatures {
    j: usize,
    value: ValueDiff,
}

impl PairFeatures {
    fn compatible(&self, tol: &ToleranceLevel) -> bool {
        self.j <= tol.j_thr as usize && self.value.relative_error(tol) <= tol.e_thr
    }

    fn judgment(&self, tol: &ToleranceLevel) -> PairJudgment {
        PairJudgment { j: self.j, e: self.value.relative_error(tol), l: self.compatible(tol) }
    }
}

/// One triplet prepared for repeated comparison.
struct Prepared<'a> {
    key: String,
    sorted: Vec<String>,
    value: &'a Cell,
}

impl<'a> Prepared<'a> {
    fn new(t: &'a Triplet, strategy: EntityStrategy) -> Self {
        let sorted = match strategy {
            EntityStrategy::JoinedKey => Vec::new(),
            EntityStrategy::PerEntityMax => {
                let mut v: Vec<String> = t.entities().iter().map(|e| normalize_entity(e)).collect();
                v.sort();
                v
            }
        };
        Prepared { key: canonical_key(&t.entities()), sorted, value: &t.value }
    }

    fn features(&self, gt: &Prepared<'_>, strategy: EntityStrategy) -> PairFeatures {
        let j = match strategy {
            EntityStrategy::JoinedKey => levenshtein(&self.key, &gt.key),
            EntityStrategy::PerEntityMax => {
                self.sorted.iter().zip(&gt.sorted).map(|(a, b)| levenshtein(a, b)).max().unwrap_or(0)
            }
        };
        PairFeatures { j, value: ValueDiff::between(self.value, gt.value) }
    }
}

/// The score of one image under one tier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageScore {
    /// Intersection over union. Serialized as `null` when not finite, which
    /// only happens in paper-literal mode.
    #[serde(deserialize_with = "iou_or_null")]
    pub iou: f64,
    /// Matched pairs (matched mode) or compatible pairs (paper-literal mode).
    pub matched: usize,
    /// Predicted triplet count.
    pub p: usize,
    /// Ground-truth triplet count.
    pub q: usize,
    /// Set when a paper-literal count exceeded `min(P, Q)`, which can push the
    /// ratio out of `[0, 1]`.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub out_of_range: bool,
}

fn iou_or_null<'de, D: serde::Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

impl ImageScore {
    fn from_count(count: usize, p: usize, q: usize) -> Self {
        let iou = if p == 0 && q == 0 {
            1.0
        } else if p == 0 || q == 0 {
            0.0
        } else {
            let denom = p as f64 + q as f64 - count as f64;
            count as f64 / denom
        };
        ImageScore { iou, matched: count, p, q, out_of_range: count > p.min(q) }
    }
}

/// Scoring configuration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scorer {
    pub mode: MatchMode,
    pub strategy: EntityStrategy,
}

/// The pairwise measurements for one image, reusable across tiers.
pub struct PairTable {
    p: usize,
    q: usize,
    features: Vec<PairFeatures>,
}

impl PairTable {
    fn compatibility(&self, tol: &ToleranceLevel) -> Vec<Vec<usize>> {
        (0..self.p).map(|i| (0..self.q).filter(|&j| self.features[i * self.q + j].compatible(tol)).collect()).collect()
    }

    /// Judgment for prediction `p` against ground truth `q`.
    pub fn judgment(&self, p: usize, q: usize, tol: &ToleranceLevel) -> PairJudgment {
        self.features[p * self.q + q].judgment(tol)
    }

    /// Matched `(prediction, ground truth)` index pairs under `tol`.
    pub fn matching(&self, tol: &ToleranceLevel) -> Vec<(usize, usize)> {
        maximum_matching(&self.compatibility(tol), self.q)
    }

    pub fn score(&self, tol: &ToleranceLevel, mode: MatchMode) -> ImageScore {
        let count = match mode {
            MatchMode::Matched => self.matching(tol).len(),
            MatchMode::PaperLiteral => self.features.iter().filter(|f| f.compatible(tol)).count(),
        };
        ImageScore::from_count(count, self.p, self.q)
    }
}

impl Scorer {
    pub fn new(mode: MatchMode) -> Self {
        Scorer { mode, strategy: EntityStrategy::default() }
    }

    pub fn with_strategy(mut self, strategy: EntityStrategy) -> Self {
        self.strategy = strategy;
        self
    }

    pub fn judge_pair(&self, pred: &Triplet, gt: &Triplet, tol: &ToleranceLevel) -> PairJudgment {
        let p = Prepared::new(pred, self.strategy);
        let g = Prepared::new(gt, self.strategy);
        p.features(&g, self.strategy).judgment(tol)
    }

    /// Measures every prediction/ground-truth pair of one image.
    pub fn pair_table(&self, pred: &TripletSet, gt: &TripletSet) -> PairTable {
        let preds: Vec<Prepared> = pred.iter().map(|t| Prepared::new(t, self.strategy)).collect();
        let gts: Vec<Prepared> = gt.iter().map(|t| Prepared::new(t, self.strategy)).collect();
        let mut features = Vec::with_capacity(preds.len() * gts.len());
        for p in &preds {
            for g in &gts {
                features.push(p.features(g, self.strategy));
            }
        }
        PairTable { p: preds.len(), q: gts.len(), features }
    }

    pub fn image_iou(&self, pred: &TripletSet, gt: &TripletSet, tol: &ToleranceLevel) -> ImageScore {
        self.pair_table(pred, gt).score(tol, self.mode)
    }

    /// Scores one image under several tiers, sharing the pairwise work.
    pub fn image_scores(&self, pred: &TripletSet, gt: &TripletSet, tiers: &[ToleranceLevel]) -> Vec<ImageScore> {
        let table = self.pair_table(pred, gt);
        tiers.iter().map(|t| table.score(t, self.mode)).collect()
    }
}

/// Judges one pair with the default entity strategy.
pub fn judge_pair(pred: &Triplet, gt: &Triplet, tol: &ToleranceLevel) -> PairJudgment {
    Scorer::default().judge_pair(pred, gt, tol)
}

/// Scores one image with the default entity strategy.
pub fn image_iou(pred: &TripletSet, gt: &TripletSet, tol: &ToleranceLevel, mode: MatchMode) -> ImageScore {
    Scorer::new(mode).image_iou(pred, gt, tol)
}
