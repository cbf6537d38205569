//! Dataset-level aggregation: Precision@t, mPrecision and EM.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{ImageScore, MatchMode, Scorer, ScrmError, ToleranceLevel};
use crate::triplet::TripletSet;

/// Bumped whenever the JSON layout of [`ScrmReport`] changes.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Fixed thresholds reported alongside mPrecision; `1.0` under the strict
/// tier is the exact-match rate.
pub const DEFAULT_THRESHOLDS: [f64; 4] = [0.5, 0.75, 0.95, 1.0];

/// The ten thresholds `0.50, 0.55, ..., 0.95` averaged by mPrecision.
///
/// Built as `k / 20` so that each value is the correctly rounded double of
/// its decimal (`0.05 * 14` would overshoot `0.7`).
pub fn mprecision_thresholds() -> [f64; 10] {
    std::array::from_fn(|i| (10 + i) as f64 / 20.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPrecision {
    pub threshold: f64,
    pub precision: f64,
}

/// Everything reported for one tolerance tier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierReport {
    pub tolerance: ToleranceLevel,
    pub per_image: Vec<ImageScore>,
    pub precision_at: Vec<ThresholdPrecision>,
    pub m_precision: f64,
}

impl TierReport {
    pub fn precision(&self, threshold: f64) -> Option<f64> {
        self.precision_at.iter().find(|p| p.threshold == threshold).map(|p| p.precision)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScrmReport {
    pub schema_version: u32,
    pub mode: MatchMode,
    /// Number of images `L`.
    pub image_count: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub image_ids: Vec<String>,
    pub thresholds: Vec<f64>,
    pub tiers: Vec<TierReport>,
    /// Precision at IoU 1.0 under the strict tier.
    pub em: f64,
}

impl ScrmReport {
    pub fn tier(&self, name: &str) -> Option<&TierReport> {
        self.tiers.iter().find(|t| t.tolerance.name == name)
    }

    pub fn precision_at(&self, tier: &str, threshold: f64) -> Option<f64> {
        self.tier(tier)?.precision(threshold)
    }

    pub fn m_precision(&self, tier: &str) -> Option<f64> {
        self.tier(tier).map(|t| t.m_precision)
    }

    /// Attaches one identifier per image, in input order.
    pub fn with_image_ids(mut self, ids: Vec<String>) -> Result<Self, ScrmError> {
        if ids.len() != self.image_count {
            return Err(ScrmError::IdCount(ids.len(), self.image_count));
        }
        self.image_ids = ids;
        Ok(self)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Share of images whose IoU reaches `threshold`.
fn precision(scores: &[ImageScore], threshold: f64) -> f64 {
    let hits = scores.iter().filter(|s| s.iou >= threshold).count();
    hits as f64 / scores.len() as f64
}

fn m_precision(scores: &[ImageScore]) -> f64 {
    let hits: usize = mprecision_thresholds().iter().map(|&t| scores.iter().filter(|s| s.iou >= t).count()).sum();
    hits as f64 / (10 * scores.len()) as f64
}

#[cfg(feature = "parallel")]
fn score_all(scorer: &Scorer, pairs: &[(TripletSet, TripletSet)], tiers: &[ToleranceLevel]) -> Vec<Vec<ImageScore>> {
    use rayon::prelude::*;
    pairs.par_iter().map(|(p, g)| scorer.image_scores(p, g, tiers)).collect()
}

#[cfg(not(feature = "parallel"))]
fn score_all(scorer: &Scorer, pairs: &[(TripletSet, TripletSet)], tiers: &[ToleranceLevel]) -> Vec<Vec<ImageScore>> {
    pairs.iter().map(|(p, g)| scorer.image_scores(p, g, tiers)).collect()
}

impl Scorer {
    /// Scores every `(prediction, ground truth)` pair and aggregates per tier.
    ///
    /// The strict tier is always scored for EM, even when it is not among
    /// `tolerances`.
    pub fn dataset_report(
        &self,
        pairs: &[(TripletSet, TripletSet)],
        tolerances: &[ToleranceLevel],
        thresholds: &[f64],
    ) -> Result<ScrmReport, ScrmError> {
        if pairs.is_empty() {
            return Err(ScrmError::EmptyDataset);
        }
        if let Some(&t) = thresholds.iter().find(|t| !t.is_finite()) {
            return Err(ScrmError::InvalidThreshold(t));
        }
        for t in tolerances {
            ToleranceLevel::new(t.name.clone(), t.j_thr, t.e_thr)?;
        }
        let strict = ToleranceLevel::strict();
        let mut tiers: Vec<ToleranceLevel> = tolerances.to_vec();
        let strict_idx = match tiers.iter().position(|t| *t == strict) {
            Some(i) => i,
            None => {
                tiers.push(strict);
                tiers.len() - 1
            }
        };

        let scores = score_all(self, pairs, &tiers);
        let column = |k: usize| -> Vec<ImageScore> { scores.iter().map(|row| row[k]).collect() };

        let em = precision(&column(strict_idx), 1.0);
        let tiers = tolerances
            .iter()
            .enumerate()
            .map(|(k, tol)| {
                let per_image = column(k);
                TierReport {
                    tolerance: tol.clone(),
                    precision_at: thresholds
                        .iter()
                        .map(|&t| ThresholdPrecision { threshold: t, precision: precision(&per_image, t) })
                        .collect(),
                    m_precision: m_precision(&per_image),
                    per_image,
                }
            })
            .collect();

        Ok(ScrmReport {
            schema_version: REPORT_SCHEMA_VERSION,
            mode: self.mode,
            image_count: pairs.len(),
            image_ids: Vec::new(),
            thresholds: thresholds.to_vec(),
            tiers,
            em,
        })
    }
}

/// Aggregates a dataset in matched mode with the default entity strategy.
pub fn dataset_report(
    pairs: &[(TripletSet, TripletSet)],
    tolerances: &[ToleranceLevel],
    thresholds: &[f64],
) -> Result<ScrmReport, ScrmError> {
    Scorer::default().dataset_report(pairs, tolerances, thresholds)
}

/// Plain-text table: one row per tier, mPrecision then Precision at each
/// threshold. The `1.0` column is labelled EM and only filled for the strict
/// tier.
pub fn render_table(report: &ScrmReport) -> String {
    let mut header = vec!["Tolerance".to_string(), "mPrecision".to_string()];
    for &t in &report.thresholds {
        header.push(if t == 1.0 { "1 (EM)".to_string() } else { format!("{t}") });
    }
    let mut rows = vec![header];
    for tier in &report.tiers {
        let is_strict = tier.tolerance == ToleranceLevel::strict();
        let mut row = vec![tier.tolerance.name.clone(), format!("{:.4}", tier.m_precision)];
        for p in &tier.precision_at {
            row.push(if p.threshold == 1.0 && !is_strict { "-".to_string() } else { format!("{:.4}", p.precision) });
        }
        rows.push(row);
    }
    let widths: Vec<usize> =
        (0..rows[0].len()).map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0)).collect();

    let mut out = String::new();
    let _ = writeln!(out, "images: {}  mode: {}  mPrecision over 0.5:0.05:0.95", report.image_count, report.mode);
    for (i, row) in rows.iter().enumerate() {
        let cells: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(c, (cell, &w))| if c == 0 { format!("{cell:<w$}") } else { format!("{cell:>w$}") })
            .collect();
        let _ = writeln!(out, "{}", cells.join("  ").trim_end());
        if i == 0 {
            let total: usize = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
            let _ = writeln!(out, "{}", "-".repeat(total));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scores(ious: &[f64]) -> Vec<ImageScore> {
        ious.iter().map(|&iou| ImageScore { iou, matched: 0, p: 1, q: 1, out_of_range: false }).collect()
    }

    #[test]
    fn threshold_grid() {
        let grid = mprecision_thresholds();
        let expected = [0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95];
        assert_eq!(grid, expected);
    }

    #[test]
    fn two_image_precision() {
        let s = scores(&[0.6, 0.9]);
        assert_eq!(precision(&s, 0.5), 1.0);
        assert_eq!(precision(&s, 0.75), 0.5);
        assert_eq!(precision(&s, 0.95), 0.0);
        // brute force over the ten thresholds
        let mut hits = 0;
        for k in 10..20 {
            let t = k as f64 / 20.0;
            hits += s.iter().filter(|x| x.iou >= t).count();
        }
        // 0.6 clears 0.50..=0.60 (3), 0.9 clears 0.50..=0.90 (9)
        assert_eq!(hits, 12);
        assert_eq!(m_precision(&s), 0.6);
    }

    #[test]
    fn boundary_iou_counts_at_threshold() {
        // 7/10 must pass t = 0.70
        let s = scores(&[7.0 / 10.0]);
        assert_eq!(m_precision(&s), 0.5);
    }

    #[test]
    fn empty_dataset_rejected() {
        assert_eq!(dataset_report(&[], &ToleranceLevel::standard(), &DEFAULT_THRESHOLDS), Err(ScrmError::EmptyDataset));
    }
}
