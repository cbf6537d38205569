//! Relaxed accuracy for chart question answering: numeric answers may be off
//! by a relative margin (5% by default), string answers must match exactly
//! after trimming and case folding.

use std::collections::HashSet;

use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

use crate::numeric::{self, Decimal};

pub const DEFAULT_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QaError {
    #[error("batch is empty")]
    EmptyBatch,
    #[error("duplicate question id {0:?}")]
    DuplicateId(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaRecord {
    #[serde(deserialize_with = "string_or_number")]
    pub question_id: String,
    #[serde(deserialize_with = "string_or_number")]
    pub predicted: String,
    #[serde(deserialize_with = "string_or_number")]
    pub gold: String,
}

/// Accepts JSON strings and numbers; numbers keep their JSON spelling.
fn string_or_number<'de, D: Deserializer<'de>>(d: D) -> Result<String, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        S(String),
        N(serde_json::Number),
    }
    Ok(match Raw::deserialize(d)? {
        Raw::S(s) => s,
        Raw::N(n) => n.to_string(),
    })
}

impl QaRecord {
    pub fn new(question_id: impl Into<String>, predicted: impl Into<String>, gold: impl Into<String>) -> Self {
        QaRecord { question_id: question_id.into(), predicted: predicted.into(), gold: gold.into() }
    }
}

/// Whether `predicted` answers `gold` under the relaxed rule.
///
/// The margin is relative to the gold value, so the relation is not
/// symmetric. Numbers are compared in exact decimal arithmetic when they fit,
/// so a difference of exactly `margin * |gold|` is accepted.
pub fn relaxed_match(predicted: &str, gold: &str, margin: f64) -> bool {
    let cleaned = |s: &str| numeric::clean(s).filter(|c| numeric::to_f64(c).is_some());
    if let (Some(p), Some(g)) = (cleaned(predicted), cleaned(gold)) {
        let exact = Decimal::parse(&p)
            .zip(Decimal::parse(&g))
            .zip(Decimal::from_f64(margin))
            .and_then(|((p, g), m)| p.within_relative(g, m));
        if let Some(ok) = exact {
            return ok;
        }
        let (p, g) = match (numeric::to_f64(&p), numeric::to_f64(&g)) {
            (Some(p), Some(g)) => (p, g),
            _ => return false,
        };
        return (p - g).abs() <= margin * g.abs();
    }
    predicted.trim().to_lowercase() == gold.trim().to_lowercase()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QaSummary {
    pub count: usize,
    pub correct: usize,
    pub accuracy: f64,
}

/// Scores a batch, rejecting empty batches and repeated question ids.
pub fn score_batch(batch: &[QaRecord], margin: f64) -> Result<QaSummary, QaError> {
    if batch.is_empty() {
        return Err(QaError::EmptyBatch);
    }
    let mut seen = HashSet::new();
    for r in batch {
        if !seen.insert(r.question_id.as_str()) {
            return Err(QaError::DuplicateId(r.question_id.clone()));
        }
    }
    let correct = batch.iter().filter(|r| relaxed_match(&r.predicted, &r.gold, margin)).count();
    Ok(QaSummary { count: batch.len(), correct, accuracy: correct as f64 / batch.len() as f64 })
}

/// Fraction of records answered correctly with the default 5% margin.
pub fn relaxed_accuracy(batch: &[QaRecord]) -> Result<f64, QaError> {
    score_batch(batch, DEFAULT_MARGIN).map(|s| s.accuracy)
}

/// Reads one [`QaRecord`] per non-blank line.
pub fn parse_jsonl(text: &str) -> Result<Vec<QaRecord>, QaError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| QaError::Parse { line: i + 1, message: e.to_string() }))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(p: &str, g: &str) -> bool {
        relaxed_match(p, g, DEFAULT_MARGIN)
    }

    #[test]
    fn numeric_margin() {
        assert!(m("10.4", "10"));
        assert!(!m("10.6", "10"));
        assert!(m("10.5", "10"));
        assert!(!m("10.5000001", "10"));
        assert!(m("0", "0"));
        assert!(!m("0.001", "0"));
        assert!(m("45%", "45"));
        assert!(m("$1,234", "1234"));
    }

    #[test]
    fn string_exact_match() {
        assert!(m("Paris", "paris"));
        assert!(m("  Paris ", "PARIS"));
        assert!(!m("Paris", "Lyon"));
        assert!(!m("10 apples", "10"));
    }

    #[test]
    fn margin_is_relative_to_gold() {
        // at exactly 5% of either side both directions pass
        assert!(m("100", "105"));
        assert!(m("105", "100"));
        // 5.2 is within 5% of 105.2 but not of 100
        assert!(m("100", "105.2"));
        assert!(!m("105.2", "100"));
    }

    #[test]
    fn reflexive() {
        for x in ["", "0", "abc", "1e400", "-3.5%", "£2"] {
            assert!(m(x, x), "{x:?}");
        }
    }

    #[test]
    fn accuracy() {
        let all = vec![QaRecord::new("1", "a", "A"), QaRecord::new("2", "3", "3")];
        assert_eq!(relaxed_accuracy(&all), Ok(1.0));
        let half = vec![QaRecord::new("1", "a", "A"), QaRecord::new("2", "4", "3")];
        assert_eq!(relaxed_accuracy(&half), Ok(0.5));
        assert_eq!(relaxed_accuracy(&[]), Err(QaError::EmptyBatch));
        let dup = vec![QaRecord::new("1", "a", "A"), QaRecord::new("1", "4", "3")];
        assert_eq!(relaxed_accuracy(&dup), Err(QaError::DuplicateId("1".into())));
    }

    #[test]
    fn jsonl_input() {
        let text = "{\"question_id\":\"q1\",\"predicted\":\"10\",\"gold\":10.2}\n\n{\"question_id\":2,\"predicted\":\"x\",\"gold\":\"y\"}\n";
        let recs = parse_jsonl(text).unwrap();
        assert_eq!(recs[0].gold, "10.2");
        assert_eq!(recs[1].question_id, "2");
        assert!(matches!(parse_jsonl("{}"), Err(QaError::Parse { line: 1, .. })));
    }
}
