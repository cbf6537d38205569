//! Structured triplet representation of chart tables.
//!
//! A table with `N` rows and `M` columns expands to `N x M` records of the
//! form `(row entity, column entity, value)`. Record sets are multisets: the
//! same record may appear more than once and is counted each time. Higher
//! order charts use [`NTuple`] with `k >= 2` entity keys per value.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lct::{Cell, LctTable};

/// Separator placed between normalized entities in a [`canonical_key`].
pub const KEY_SEPARATOR: char = '\u{1F}';

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TripletError {
    #[error("entity is empty after trimming")]
    EmptyEntity,
    #[error("a tuple needs at least two entity keys, got {0}")]
    ArityTooSmall(usize),
    #[error("tuple has arity {got}, set has arity {expected}")]
    MixedArity { expected: usize, got: usize },
    #[error("record set is empty")]
    EmptySet,
    #[error("grid is incomplete: {} position(s) missing, first is ({}, {})", .0.len(), .0[0].0, .0[0].1)]
    IncompleteGrid(Vec<(String, String)>),
    #[error("position ({0}, {1}) has conflicting values")]
    ConflictingDuplicate(String, String),
    #[error("permutation is not a bijection over 0..{0}")]
    InvalidPermutation(usize),
}

/// One `(row entity, column entity, value)` record.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triplet {
    pub row_entity: String,
    pub col_entity: String,
    pub value: Cell,
}

impl Triplet {
    /// Builds a triplet, rejecting entities that are blank after trimming.
    ///
    /// [`to_str`] does not go through this check: it copies whatever entities
    /// the table holds.
    pub fn new(
        row_entity: impl Into<String>,
        col_entity: impl Into<String>,
        value: impl Into<Cell>,
    ) -> Result<Self, TripletError> {
        let row_entity = row_entity.into();
        let col_entity = col_entity.into();
        if row_entity.trim().is_empty() || col_entity.trim().is_empty() {
            return Err(TripletError::EmptyEntity);
        }
        Ok(Triplet { row_entity, col_entity, value: value.into() })
    }

    pub fn entities(&self) -> [&str; 2] {
        [&self.row_entity, &self.col_entity]
    }

    /// The same record with the entity pair swapped.
    pub fn swapped(&self) -> Triplet {
        Triplet { row_entity: self.col_entity.clone(), col_entity: self.row_entity.clone(), value: self.value.clone() }
    }
}

/// A multiset of triplets.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TripletSet {
    triplets: Vec<Triplet>,
}

impl TripletSet {
    pub fn new(triplets: Vec<Triplet>) -> Self {
        TripletSet { triplets }
    }

    pub fn len(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Triplet> {
        self.triplets.iter()
    }

    pub fn as_slice(&self) -> &[Triplet] {
        &self.triplets
    }

    pub fn push(&mut self, t: Triplet) {
        self.triplets.push(t);
    }

    /// Records sorted into canonical order.
    pub fn sorted(&self) -> Vec<Triplet> {
        let mut v = self.triplets.clone();
        v.sort();
        v
    }

    /// Every record with its entity pair swapped.
    pub fn swapped(&self) -> TripletSet {
        TripletSet::new(self.triplets.iter().map(Triplet::swapped).collect())
    }

    /// Converts to the general `k`-ary form with `k = 2`.
    pub fn to_ntuples(&self) -> NTupleSet {
        NTupleSet {
            arity: 2,
            tuples: self
                .triplets
                .iter()
                .map(|t| NTuple {
                    entity_keys: vec![t.row_entity.clone(), t.col_entity.clone()],
                    value: t.value.clone(),
                })
                .collect(),
        }
    }
}

/// Multiset equality: order is ignored, multiplicity is not.
impl PartialEq for TripletSet {
    fn eq(&self, other: &Self) -> bool {
        self.len() == other.len() && self.sorted() == other.sorted()
    }
}

impl Eq for TripletSet {}

impl FromIterator<Triplet> for TripletSet {
    fn from_iter<I: IntoIterator<Item = Triplet>>(iter: I) -> Self {
        TripletSet::new(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a TripletSet {
    type Item = &'a Triplet;
    type IntoIter = std::slice::Iter<'a, Triplet>;

    fn into_iter(self) -> Self::IntoIter {
        self.triplets.iter()
    }
}

impl TryFrom<NTupleSet> for TripletSet {
    type Error = TripletError;

    fn try_from(set: NTupleSet) -> Result<Self, Self::Error> {
        if set.arity != 2 && !set.tuples.is_empty() {
            return Err(TripletError::MixedArity { expected: 2, got: set.arity });
        }
        Ok(set
            .tuples
            .into_iter()
            .map(|t| {
                let mut keys = t.entity_keys.into_iter();
                let row_entity = keys.next().unwrap_or_default();
                let col_entity = keys.next().unwrap_or_default();
                Triplet { row_entity, col_entity, value: t.value }
            })
            .collect())
    }
}

/// A record with `k >= 2` entity keys and one value.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NTuple {
    pub entity_keys: Vec<String>,
    pub value: Cell,
}

impl NTuple {
    pub fn new(entity_keys: Vec<String>, value: impl Into<Cell>) -> Result<Self, TripletError> {
        if entity_keys.len() < 2 {
            return Err(TripletError::ArityTooSmall(entity_keys.len()));
        }
        if entity_keys.iter().any(|e| e.trim().is_empty()) {
            return Err(TripletError::EmptyEntity);
        }
        Ok(NTuple { entity_keys, value: value.into() })
    }

    pub fn arity(&self) -> usize {
        self.entity_keys.len()
    }
}

/// A multiset of tuples sharing one arity.
#[derive(Debug, Clone, Serialize)]
pub struct NTupleSet {
    arity: usize,
    tuples: Vec<NTuple>,
}

impl NTupleSet {
    pub fn new(arity: usize) -> Result<Self, TripletError> {
        if arity < 2 {
            return Err(TripletError::ArityTooSmall(arity));
        }
        Ok(NTupleSet { arity, tuples: Vec::new() })
    }

    /// Builds a set from tuples, inferring the arity from the first one.
    pub fn from_tuples(tuples: Vec<NTuple>) -> Result<Self, TripletError> {
        let arity = tuples.first().map_or(2, NTuple::arity);
        let mut set = NTupleSet::new(arity)?;
        for t in tuples {
            set.push(t)?;
        }
        Ok(set)
    }

    pub fn push(&mut self, t: NTuple) -> Result<(), TripletError> {
        if t.arity() != self.arity {
            return Err(TripletError::MixedArity { expected: self.arity, got: t.arity() });
        }
        self.tuples.push(t);
        Ok(())
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn tuples(&self) -> &[NTuple] {
        &self.tuples
    }

    pub fn sorted(&self) -> Vec<NTuple> {
        let mut v = self.tuples.clone();
        v.sort();
        v
    }
}

impl PartialEq for NTupleSet {
    fn eq(&self, other: &Self) -> bool {
        // two empty sets are equal whatever arity they were declared with
        self.len() == other.len() && (self.is_empty() || self.arity == other.arity) && self.sorted() == other.sorted()
    }
}

impl Eq for NTupleSet {}

/// Expands a table into one triplet per grid position.
pub fn to_str(table: &LctTable) -> TripletSet {
    let mut out = Vec::with_capacity(table.width() * table.height());
    for (row, cells) in table.row_entities().iter().zip(table.values()) {
        for (col, cell) in table.col_entities().iter().zip(cells) {
            out.push(Triplet { row_entity: row.clone(), col_entity: col.clone(), value: cell.clone() });
        }
    }
    TripletSet::new(out)
}

/// Rebuilds a table from a complete grid of triplets.
///
/// Rows and columns come out in lexicographic order of their entity strings.
/// Exact duplicates of a position collapse to one cell.
pub fn from_str(set: &TripletSet) -> Result<LctTable, TripletError> {
    if set.is_empty() {
        return Err(TripletError::EmptySet);
    }
    let rows: BTreeSet<&str> = set.iter().map(|t| t.row_entity.as_str()).collect();
    let cols: BTreeSet<&str> = set.iter().map(|t| t.col_entity.as_str()).collect();
    let mut grid: BTreeMap<(&str, &str), &Cell> = BTreeMap::new();
    for t in set {
        let key = (t.row_entity.as_str(), t.col_entity.as_str());
        match grid.get(&key) {
            Some(existing) if **existing != t.value => {
                return Err(TripletError::ConflictingDuplicate(key.0.into(), key.1.into()));
            }
            Some(_) => {}
            None => {
                grid.insert(key, &t.value);
            }
        }
    }
    let mut missing = Vec::new();
    let mut values = Vec::with_capacity(rows.len());
    for &r in &rows {
        let mut row = Vec::with_capacity(cols.len());
        for &c in &cols {
            match grid.get(&(r, c)) {
                Some(cell) => row.push((*cell).clone()),
                None => missing.push((r.to_string(), c.to_string())),
            }
        }
        values.push(row);
    }
    if !missing.is_empty() {
        return Err(TripletError::IncompleteGrid(missing));
    }
    let table = LctTable::new(
        cols.into_iter().map(String::from).collect(),
        rows.into_iter().map(String::from).collect(),
        values,
    )
    .expect("grid built from non-empty entity sets");
    Ok(table)
}

/// Swaps the roles of rows and columns.
pub fn transpose(table: &LctTable) -> LctTable {
    let (cols, rows, values) = table.clone().into_parts();
    let mut transposed: Vec<Vec<Cell>> = (0..cols.len()).map(|_| Vec::with_capacity(rows.len())).collect();
    for row in values {
        for (m, cell) in row.into_iter().enumerate() {
            transposed[m].push(cell);
        }
    }
    LctTable::new(rows, cols, transposed).expect("transpose preserves shape invariants")
}

fn check_permutation(perm: &[usize], n: usize) -> Result<(), TripletError> {
    let mut seen = vec![false; n];
    if perm.len() != n {
        return Err(TripletError::InvalidPermutation(n));
    }
    for &i in perm {
        if i >= n || std::mem::replace(&mut seen[i], true) {
            return Err(TripletError::InvalidPermutation(n));
        }
    }
    Ok(())
}

/// Reorders rows and columns. Output row `i` is input row `row_perm[i]`, and
/// likewise for columns.
pub fn permute(table: &LctTable, row_perm: &[usize], col_perm: &[usize]) -> Result<LctTable, TripletError> {
    check_permutation(row_perm, table.height())?;
    check_permutation(col_perm, table.width())?;
    let cols = col_perm.iter().map(|&m| table.col_entities()[m].clone()).collect();
    let rows = row_perm.iter().map(|&n| table.row_entities()[n].clone()).collect();
    let values = row_perm.iter().map(|&n| col_perm.iter().map(|&m| table.values()[n][m].clone()).collect()).collect();
    Ok(LctTable::new(cols, rows, values).expect("permutation preserves shape"))
}

/// Trims, collapses internal whitespace runs to one space, and lowercases.
pub fn normalize_entity(entity: &str) -> String {
    let mut out = String::with_capacity(entity.len());
    for word in entity.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out.to_lowercase()
}

/// Order-independent comparison key for a set of entities: each entity is
/// normalized, the results are sorted and joined with [`KEY_SEPARATOR`].
pub fn canonical_key<S: AsRef<str>>(entities: &[S]) -> String {
    let mut parts: Vec<String> = entities.iter().map(|e| normalize_entity(e.as_ref())).collect();
    parts.sort();
    parts.join(&KEY_SEPARATOR.to_string())
}

impl Triplet {
    pub fn canonical_key(&self) -> String {
        canonical_key(&self.entities())
    }
}

impl NTuple {
    pub fn canonical_key(&self) -> String {
        canonical_key(&self.entity_keys)
    }
}

/// Serialization formats for record sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrFormat {
    /// One `(entity, entity, value)` line per record.
    Text,
    /// One JSON object per line: `{"entities": [...], "value": {"raw": ..., "number": ...}}`.
    Jsonl,
}

/// Anything that can be rendered as STR records.
pub trait StrRecords {
    fn records(&self) -> Vec<(Vec<&str>, &Cell)>;
}

impl StrRecords for TripletSet {
    fn records(&self) -> Vec<(Vec<&str>, &Cell)> {
        self.iter().map(|t| (t.entities().to_vec(), &t.value)).collect()
    }
}

impl StrRecords for NTupleSet {
    fn records(&self) -> Vec<(Vec<&str>, &Cell)> {
        self.tuples.iter().map(|t| (t.entity_keys.iter().map(String::as_str).collect(), &t.value)).collect()
    }
}

#[derive(Serialize, Deserialize)]
struct JsonRecord<E> {
    entities: Vec<E>,
    value: Cell,
}

/// Renders records in canonical (sorted) order.
pub fn serialize_str<S: StrRecords + ?Sized>(set: &S, format: StrFormat) -> String {
    let mut records = set.records();
    records.sort();
    let mut out = String::new();
    for (entities, value) in records {
        match format {
            StrFormat::Text => {
                out.push('(');
                for e in &entities {
                    push_text_field(&mut out, e);
                    out.push_str(", ");
                }
                push_text_field(&mut out, value.raw());
                out.push(')');
            }
            StrFormat::Jsonl => {
                let rec = JsonRecord { entities, value: value.clone() };
                out.push_str(&serde_json::to_string(&rec).expect("record serializes"));
            }
        }
        out.push('\n');
    }
    out
}

fn push_text_field(out: &mut String, field: &str) {
    let plain = !field.is_empty() && field.trim() == field && !field.contains([',', '(', ')', '"', '\n', '\r']);
    if plain {
        out.push_str(field);
    } else {
        out.push('"');
        out.push_str(&field.replace('"', "\"\""));
        out.push('"');
    }
}

/// Errors from reading STR text or JSONL.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StrParseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: {source}")]
    Record { line: usize, source: TripletError },
}

fn syntax(line: usize, message: impl Into<String>) -> StrParseError {
    StrParseError::Syntax { line, message: message.into() }
}

/// Parses either STR format back into a record set.
pub fn parse_str(text: &str, format: StrFormat) -> Result<NTupleSet, StrParseError> {
    let records = match format {
        StrFormat::Text => parse_text_records(text)?,
        StrFormat::Jsonl => parse_jsonl_records(text)?,
    };
    let mut set: Option<NTupleSet> = None;
    for (line, fields, value) in records {
        let tuple = NTuple::new(fields, value).map_err(|source| StrParseError::Record { line, source })?;
        let set = match &mut set {
            Some(s) => s,
            None => set.insert(NTupleSet::new(tuple.arity()).expect("arity checked by NTuple::new")),
        };
        set.push(tuple).map_err(|source| StrParseError::Record { line, source })?;
    }
    Ok(set.unwrap_or_else(|| NTupleSet::new(2).expect("2 is a valid arity")))
}

type RawRecord = (usize, Vec<String>, Cell);

fn parse_jsonl_records(text: &str) -> Result<Vec<RawRecord>, StrParseError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: JsonRecord<String> = serde_json::from_str(line).map_err(|e| syntax(i + 1, e.to_string()))?;
        out.push((i + 1, rec.entities, rec.value));
    }
    Ok(out)
}

fn parse_text_records(text: &str) -> Result<Vec<RawRecord>, StrParseError> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let mut line = 1usize;
    loop {
        // skip blank space between records
        while let Some(&c) = chars.peek() {
            if !c.is_whitespace() {
                break;
            }
            if c == '\n' {
                line += 1;
            }
            chars.next();
        }
        let Some(c) = chars.next() else { break };
        if c != '(' {
            return Err(syntax(line, format!("expected '(' but found {c:?}")));
        }
        let start = line;
        let mut fields = Vec::new();
        loop {
            while chars.peek().is_some_and(|&c| c == ' ' || c == '\t') {
                chars.next();
            }
            let mut field = String::new();
            if chars.peek() == Some(&'"') {
                chars.next();
                loop {
                    match chars.next() {
                        Some('"') if chars.peek() == Some(&'"') => {
                            chars.next();
                            field.push('"');
                        }
                        Some('"') => break,
                        Some(c) => {
                            if c == '\n' {
                                line += 1;
                            }
                            field.push(c);
                        }
                        None => return Err(syntax(start, "unterminated quoted field")),
                    }
                }
                while chars.peek().is_some_and(|&c| c == ' ' || c == '\t') {
                    chars.next();
                }
            } else {
                while let Some(&c) = chars.peek() {
                    if matches!(c, ',' | ')' | '\n') {
                        break;
                    }
                    field.push(c);
                    chars.next();
                }
                let trimmed = field.trim_end().len();
                field.truncate(trimmed);
            }
            fields.push(field);
            match chars.next() {
                Some(',') => continue,
                Some(')') => break,
                Some(c) => return Err(syntax(line, format!("unexpected {c:?} inside record"))),
                None => return Err(syntax(start, "record is missing ')'")),
            }
        }
        while chars.peek().is_some_and(|&c| c == ' ' || c == '\t' || c == '\r') {
            chars.next();
        }
        match chars.peek() {
            None | Some('\n') => {}
            Some(c) => return Err(syntax(line, format!("trailing {c:?} after record"))),
        }
        if fields.len() < 3 {
            return Err(syntax(
                start,
                format!("record needs at least two entities and a value, got {} field(s)", fields.len()),
            ));
        }
        let value = Cell::new(fields.pop().expect("len checked"));
        out.push((start, fields, value));
    }
    Ok(out)
}

impl fmt::Display for TripletSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_str(self, StrFormat::Text))
    }
}
