//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every export takes and returns plain strings; structured results are JSON.
//! Inputs may be LCT, STR text or STR JSONL and are told apart by their first
//! character.

use chartrel::scrm::{MatchMode, Scorer, ToleranceLevel};
use chartrel::triplet::{from_str, parse_str, serialize_str, to_str};
use chartrel::{parse_lct, serialize_lct, StrFormat, TripletSet};
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn detect(text: &str) -> Option<StrFormat> {
    match text.trim_start().chars().next() {
        Some('{') => Some(StrFormat::Jsonl),
        Some('(') => Some(StrFormat::Text),
        _ => None,
    }
}

fn triplets(text: &str) -> Result<TripletSet, String> {
    match detect(text) {
        Some(format) => {
            let set = parse_str(text, format).map_err(|e| e.to_string())?;
            TripletSet::try_from(set).map_err(|e| e.to_string())
        }
        None => parse_lct(text).map(|t| to_str(&t)).map_err(|e| e.to_string()),
    }
}

/// Converts `text` to `target`: `lct`, `str-text` or `str-jsonl`.
pub fn convert_text(text: &str, target: &str) -> Result<String, String> {
    let set = triplets(text)?;
    match target {
        "str-text" => Ok(serialize_str(&set, StrFormat::Text)),
        "str-jsonl" => Ok(serialize_str(&set, StrFormat::Jsonl)),
        "lct" => match detect(text) {
            // keep the original row and column order when the input is a table
            None => parse_lct(text).map(|t| serialize_lct(&t)).map_err(|e| e.to_string()),
            Some(_) => from_str(&set).map(|t| serialize_lct(&t)).map_err(|e| e.to_string()),
        },
        other => Err(format!("unknown target {other:?}")),
    }
}

#[derive(Serialize)]
struct ShownTriplet {
    row: String,
    col: String,
    value: String,
}

#[derive(Serialize)]
struct TierResult {
    name: String,
    j_thr: u32,
    e_thr: f64,
    iou: Option<f64>,
    matched: usize,
    out_of_range: bool,
    /// `[pred index, gt index]` for each matched pair (matched mode only).
    pairs: Vec<(usize, usize)>,
}

#[derive(Serialize)]
struct PairCell {
    j: usize,
    e: Option<f64>,
    l: bool,
}

#[derive(Serialize)]
struct ScoreResult {
    mode: MatchMode,
    pred: Vec<ShownTriplet>,
    gt: Vec<ShownTriplet>,
    tiers: Vec<TierResult>,
    /// Judgments under the custom tier, `[pred][gt]`.
    judgments: Vec<Vec<PairCell>>,
}

fn shown(set: &TripletSet) -> (TripletSet, Vec<ShownTriplet>) {
    let sorted: TripletSet = set.sorted().into_iter().collect();
    let rows = sorted
        .iter()
        .map(|t| ShownTriplet {
            row: t.row_entity.clone(),
            col: t.col_entity.clone(),
            value: t.value.raw().to_string(),
        })
        .collect();
    (sorted, rows)
}

/// Scores `pred` against `gt` under the three standard tiers plus a custom
/// `(j_thr, e_thr)` tier. Returns JSON.
pub fn score_text(pred: &str, gt: &str, j_thr: u32, e_thr: f64, mode: &str) -> Result<String, String> {
    let mode: MatchMode = mode.parse()?;
    let custom = ToleranceLevel::new("custom", j_thr, e_thr).map_err(|e| e.to_string())?;
    let (pred, pred_rows) = shown(&triplets(pred).map_err(|e| format!("prediction: {e}"))?);
    let (gt, gt_rows) = shown(&triplets(gt).map_err(|e| format!("ground truth: {e}"))?);
    let table = Scorer::new(mode).pair_table(&pred, &gt);

    let mut tiers = ToleranceLevel::standard();
    tiers.push(custom.clone());
    let tiers = tiers
        .into_iter()
        .map(|tol| {
            let s = table.score(&tol, mode);
            let pairs = if mode == MatchMode::Matched { table.matching(&tol) } else { Vec::new() };
            TierResult {
                name: tol.name.clone(),
                j_thr: tol.j_thr,
                e_thr: tol.e_thr,
                iou: s.iou.is_finite().then_some(s.iou),
                matched: s.matched,
                out_of_range: s.out_of_range,
                pairs,
            }
        })
        .collect();
    let judgments = (0..pred.len())
        .map(|p| {
            (0..gt.len())
                .map(|q| {
                    let j = table.judgment(p, q, &custom);
                    PairCell { j: j.j, e: j.e.is_finite().then_some(j.e), l: j.l }
                })
                .collect()
        })
        .collect();
    let result = ScoreResult { mode, pred: pred_rows, gt: gt_rows, tiers, judgments };
    serde_json::to_string(&result).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn convert(text: &str, target: &str) -> Result<String, JsError> {
    convert_text(text, target).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn score(pred: &str, gt: &str, j_thr: u32, e_thr: f64, mode: &str) -> Result<String, JsError> {
    score_text(pred, gt, j_thr, e_thr, mode).map_err(|e| JsError::new(&e))
}

/// Relaxed QA match with a relative `margin` (0.05 is the usual 5%).
#[wasm_bindgen]
pub fn qa_match(predicted: &str, gold: &str, margin: f64) -> bool {
    chartrel::qa::relaxed_match(predicted, gold, margin)
}
