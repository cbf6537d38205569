//! Linearized CSV tokens: the flat text form of a chart's data table.
//!
//! Line 1 holds a corner token (`none` on output) followed by the column
//! header entities; every following line holds a row header entity followed by
//! one value per column. Fields are comma separated and may be double-quoted
//! RFC-4180 style. A text with no real newline may use the two-character
//! sequence `/n` as its line separator instead.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric;

/// Errors from [`parse_lct`]. Line numbers are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LctError {
    #[error("input is empty")]
    EmptyInput,
    #[error("missing header: line 1 must hold a corner token and at least one column entity")]
    MissingHeader,
    #[error("line {line}: expected {expected} fields, got {got}")]
    RaggedRow { line: usize, expected: usize, got: usize },
    #[error("table has a header but no data rows")]
    NoRows,
    #[error("line {line}: unterminated quoted field")]
    UnterminatedQuote { line: usize },
}

/// One value cell. `numeric` is derived from `raw` and kept in sync by the
/// constructor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "CellRepr", into = "CellRepr")]
pub struct Cell {
    raw: String,
    numeric: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct CellRepr {
    raw: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    number: Option<f64>,
}

impl From<CellRepr> for Cell {
    fn from(r: CellRepr) -> Self {
        // the number is always re-derived so that it cannot disagree with raw
        Cell::new(r.raw)
    }
}

impl From<Cell> for CellRepr {
    fn from(c: Cell) -> Self {
        CellRepr { raw: c.raw, number: c.numeric }
    }
}

impl Cell {
    pub fn new(raw: impl Into<String>) -> Self {
        let raw = raw.into();
        let numeric = normalize_numeric(&raw);
        Cell { raw, numeric }
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn numeric(&self) -> Option<f64> {
        self.numeric
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }
}

impl Eq for Cell {}

impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Cell {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // numeric is a function of raw
        self.raw.cmp(&other.raw)
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw)
    }
}

impl std::hash::Hash for Cell {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.raw.hash(state);
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::new(s)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::new(s)
    }
}

/// A rectangular chart table with `N` row entities, `M` column entities and
/// an `N x M` value grid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LctTable {
    col_entities: Vec<String>,
    row_entities: Vec<String>,
    values: Vec<Vec<Cell>>,
}

/// Reasons [`LctTable::new`] rejects its components.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TableShapeError {
    #[error("a table needs at least one column and one row")]
    Empty,
    #[error("row count {rows} does not match value grid height {grid}")]
    RowCount { rows: usize, grid: usize },
    #[error("row {row} has {got} cells, expected {expected}")]
    Ragged { row: usize, expected: usize, got: usize },
}

impl LctTable {
    pub fn new(
        col_entities: Vec<String>,
        row_entities: Vec<String>,
        values: Vec<Vec<Cell>>,
    ) -> Result<Self, TableShapeError> {
        if col_entities.is_empty() || row_entities.is_empty() {
            return Err(TableShapeError::Empty);
        }
        if values.len() != row_entities.len() {
            return Err(TableShapeError::RowCount { rows: row_entities.len(), grid: values.len() });
        }
        let m = col_entities.len();
        if let Some((row, r)) = values.iter().enumerate().find(|(_, r)| r.len() != m) {
            return Err(TableShapeError::Ragged { row, expected: m, got: r.len() });
        }
        Ok(LctTable { col_entities, row_entities, values })
    }

    /// Builds a table from string cells; mostly a convenience for tests and
    /// fixtures.
    pub fn from_strs(cols: &[&str], rows: &[&str], values: &[&[&str]]) -> Result<Self, TableShapeError> {
        LctTable::new(
            cols.iter().map(|s| s.to_string()).collect(),
            rows.iter().map(|s| s.to_string()).collect(),
            values.iter().map(|r| r.iter().map(|s| Cell::new(*s)).collect()).collect(),
        )
    }

    pub fn col_entities(&self) -> &[String] {
        &self.col_entities
    }

    pub fn row_entities(&self) -> &[String] {
        &self.row_entities
    }

    pub fn values(&self) -> &[Vec<Cell>] {
        &self.values
    }

    /// Number of columns (`M`).
    pub fn width(&self) -> usize {
        self.col_entities.len()
    }

    /// Number of rows (`N`).
    pub fn height(&self) -> usize {
        self.row_entities.len()
    }

    pub fn cell(&self, row: usize, col: usize) -> Option<&Cell> {
        self.values.get(row)?.get(col)
    }

    /// Grid positions `(row, col)` whose raw text is empty.
    pub fn empty_cells(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (n, row) in self.values.iter().enumerate() {
            for (m, c) in row.iter().enumerate() {
                if c.is_empty() {
                    out.push((n, m));
                }
            }
        }
        out
    }

    pub(crate) fn into_parts(self) -> (Vec<String>, Vec<String>, Vec<Vec<Cell>>) {
        (self.col_entities, self.row_entities, self.values)
    }
}

impl fmt::Display for LctTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_lct(self))
    }
}

impl std::str::FromStr for LctTable {
    type Err = LctError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_lct(s)
    }
}

/// Splits `text` into records of fields, honoring double quotes.
///
/// Each record carries the 1-based line number it started on.
fn tokenize(text: &str) -> Result<Vec<(usize, Vec<String>)>, LctError> {
    let slash_n = !text.contains('\n');
    let mut records = Vec::new();
    let mut fields: Vec<String> = Vec::new();
    let mut field = String::new();
    let mut line = 1usize;
    let mut record_line = 1usize;
    let mut in_quotes = false;
    let mut quote_line = 0usize;
    // true once the current field has started with a quote
    let mut quoted = false;

    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        if in_quotes {
            match c {
                '"' if chars.peek() == Some(&'"') => {
                    chars.next();
                    field.push('"');
                }
                '"' => in_quotes = false,
                '\n' => {
                    line += 1;
                    field.push(c);
                }
                _ => field.push(c),
            }
            continue;
        }
        let end_of_line = match c {
            '\n' => true,
            '\r' if chars.peek() == Some(&'\n') => {
                chars.next();
                true
            }
            '/' if slash_n && chars.peek() == Some(&'n') => {
                chars.next();
                true
            }
            _ => false,
        };
        if end_of_line {
            fields.push(std::mem::take(&mut field));
            records.push((record_line, std::mem::take(&mut fields)));
            quoted = false;
            line += 1;
            record_line = line;
            continue;
        }
        match c {
            ',' => {
                fields.push(std::mem::take(&mut field));
                quoted = false;
            }
            '"' if field.is_empty() && !quoted => {
                in_quotes = true;
                quoted = true;
                quote_line = line;
            }
            _ => field.push(c),
        }
    }
    if in_quotes {
        return Err(LctError::UnterminatedQuote { line: quote_line });
    }
    if !field.is_empty() || !fields.is_empty() || quoted {
        fields.push(field);
        records.push((record_line, fields));
    }
    Ok(records)
}

fn is_blank(record: &[String]) -> bool {
    record.len() == 1 && record[0].trim().is_empty()
}

/// Parses linearized CSV text into a table.
///
/// The corner token is not validated: `none`, an empty field, or any other
/// label is accepted and discarded. Blank lines after the last row are
/// ignored; a blank line between rows is a ragged row.
pub fn parse_lct(text: &str) -> Result<LctTable, LctError> {
    if text.trim().is_empty() {
        return Err(LctError::EmptyInput);
    }
    let mut records = tokenize(text)?;
    while records.last().is_some_and(|(_, r)| is_blank(r)) {
        records.pop();
    }
    let mut iter = records.into_iter();
    let (_, header) = iter.next().ok_or(LctError::MissingHeader)?;
    if header.len() < 2 {
        return Err(LctError::MissingHeader);
    }
    let expected = header.len();
    let col_entities: Vec<String> = header.into_iter().skip(1).collect();

    let mut row_entities = Vec::new();
    let mut values = Vec::new();
    for (line, record) in iter {
        if record.len() != expected {
            return Err(LctError::RaggedRow { line, expected, got: record.len() });
        }
        let mut fields = record.into_iter();
        row_entities.push(fields.next().unwrap_or_default());
        values.push(fields.map(Cell::new).collect());
    }
    if row_entities.is_empty() {
        return Err(LctError::NoRows);
    }
    Ok(LctTable { col_entities, row_entities, values })
}

fn needs_quotes(field: &str) -> bool {
    field.contains([',', '"', '\n', '\r'])
}

pub(crate) fn push_field(out: &mut String, field: &str) {
    if needs_quotes(field) {
        out.push('"');
        out.push_str(&field.replace('"', "\"\""));
        out.push('"');
    } else {
        out.push_str(field);
    }
}

/// Renders a table in canonical form: `none` corner, real newlines, quoting
/// only where a field holds a comma, quote or line break.
pub fn serialize_lct(table: &LctTable) -> String {
    let mut out = String::from("none");
    for c in &table.col_entities {
        out.push(',');
        push_field(&mut out, c);
    }
    out.push('\n');
    for (entity, row) in table.row_entities.iter().zip(&table.values) {
        push_field(&mut out, entity);
        for cell in row {
            out.push(',');
            push_field(&mut out, cell.raw());
        }
        out.push('\n');
    }
    out
}

/// Interprets a cell as a number.
///
/// Strips surrounding whitespace, one currency symbol (`$`, `€`, `£`), a
/// trailing `%` and thousands-separator commas, then parses a signed decimal.
/// Percent values are not rescaled: `"45%"` is `45`. Values that overflow a
/// double are not numbers.
pub fn normalize_numeric(raw: &str) -> Option<f64> {
    numeric::to_f64(&numeric::clean(raw)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(cols: &[&str], rows: &[&str], vals: &[&[&str]]) -> LctTable {
        LctTable::from_strs(cols, rows, vals).unwrap()
    }

    #[test]
    fn parses_minimal_row() {
        let table = parse_lct("none,Q1,Q2\nSales,10,20\n").unwrap();
        assert_eq!(table, t(&["Q1", "Q2"], &["Sales"], &[&["10", "20"]]));
        assert_eq!(table.cell(0, 1).unwrap().numeric(), Some(20.0));
    }

    #[test]
    fn parses_minimal_column() {
        let table = parse_lct("none,A\nx,1\ny,2\n").unwrap();
        assert_eq!(table.height(), 2);
        assert_eq!(table.width(), 1);
        assert_eq!(table, t(&["A"], &["x", "y"], &[&["1"], &["2"]]));
    }

    #[test]
    fn ragged_row_reports_line() {
        assert_eq!(parse_lct("none,A,B\nx,1\n"), Err(LctError::RaggedRow { line: 2, expected: 3, got: 2 }));
    }

    #[test]
    fn header_errors() {
        assert_eq!(parse_lct(""), Err(LctError::EmptyInput));
        assert_eq!(parse_lct("  \n\n"), Err(LctError::EmptyInput));
        assert_eq!(parse_lct("none\nx\n"), Err(LctError::MissingHeader));
        assert_eq!(parse_lct("none,A\n"), Err(LctError::NoRows));
        assert_eq!(parse_lct("none,A\nx,\"1\n"), Err(LctError::UnterminatedQuote { line: 2 }));
    }

    #[test]
    fn corner_token_is_tolerant() {
        let expected = t(&["A"], &["x"], &[&["1"]]);
        for text in ["NONE,A\nx,1", ",A\nx,1\n", "None,A\r\nx,1\r\n", "Year,A\nx,1\n"] {
            assert_eq!(parse_lct(text).unwrap(), expected, "{text:?}");
        }
    }

    #[test]
    fn slash_n_line_separator() {
        let table = parse_lct("none,Q1,Q2 /n Sales,10,20 /n").unwrap();
        assert_eq!(table.col_entities(), ["Q1", "Q2 "]);
        assert_eq!(table.row_entities(), [" Sales"]);
        assert_eq!(table.cell(0, 1).unwrap().raw(), "20 ");
        assert_eq!(table.cell(0, 1).unwrap().numeric(), Some(20.0));

        // with real newlines present, "/n" is ordinary text
        let table = parse_lct("none,km/night\nx,1\n").unwrap();
        assert_eq!(table.col_entities(), ["km/night"]);
    }

    #[test]
    fn quoted_fields() {
        let table = parse_lct("none,\"a, b\",\"say \"\"hi\"\"\"\nx,\"1,000\",\"two\nlines\"\n").unwrap();
        assert_eq!(table.col_entities(), ["a, b", "say \"hi\""]);
        assert_eq!(table.cell(0, 0).unwrap().raw(), "1,000");
        assert_eq!(table.cell(0, 0).unwrap().numeric(), Some(1000.0));
        assert_eq!(table.cell(0, 1).unwrap().raw(), "two\nlines");
    }

    #[test]
    fn interior_none_is_literal() {
        let table = parse_lct("none,A\nx,none\n").unwrap();
        assert_eq!(table.cell(0, 0).unwrap().raw(), "none");
        assert_eq!(table.cell(0, 0).unwrap().numeric(), None);
    }

    #[test]
    fn empty_cells_are_kept_and_flagged() {
        let table = parse_lct("none,A,B\nx,,2\ny,3,\n").unwrap();
        assert_eq!(table.empty_cells(), vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn trailing_blank_lines_ignored_interior_blank_rejected() {
        assert!(parse_lct("none,A\nx,1\n\n\n").is_ok());
        assert_eq!(parse_lct("none,A\n\nx,1\n"), Err(LctError::RaggedRow { line: 2, expected: 2, got: 1 }));
    }

    #[test]
    fn serializes_canonical_layout() {
        assert_eq!(serialize_lct(&t(&["Q1"], &["Sales"], &[&["10"]])), "none,Q1\nSales,10\n");
        let out = serialize_lct(&t(&["Q1"], &["Sales"], &[&["1,000"]]));
        assert_eq!(out, "none,Q1\nSales,\"1,000\"\n");
        let out = serialize_lct(&t(&["a\"b"], &["r\nr"], &[&["v"]]));
        assert_eq!(out, "none,\"a\"\"b\"\n\"r\nr\",v\n");
    }

    #[test]
    fn shape_validation() {
        assert_eq!(LctTable::from_strs(&[], &["x"], &[&[]]), Err(TableShapeError::Empty));
        assert_eq!(
            LctTable::from_strs(&["A", "B"], &["x"], &[&["1"]]),
            Err(TableShapeError::Ragged { row: 0, expected: 2, got: 1 })
        );
        assert_eq!(
            LctTable::from_strs(&["A"], &["x", "y"], &[&["1"]]),
            Err(TableShapeError::RowCount { rows: 2, grid: 1 })
        );
    }

    #[test]
    fn numeric_normalization() {
        assert_eq!(normalize_numeric("1,234.5"), Some(1234.5));
        assert_eq!(normalize_numeric("45%"), Some(45.0));
        assert_eq!(normalize_numeric("abc"), None);
        assert_eq!(normalize_numeric(" $1,000 "), Some(1000.0));
        assert_eq!(normalize_numeric("€-3.5"), Some(-3.5));
        assert_eq!(normalize_numeric("-£3.5"), Some(-3.5));
        assert_eq!(normalize_numeric("+.5"), Some(0.5));
        assert_eq!(normalize_numeric("12.5 %"), Some(12.5));
        assert_eq!(normalize_numeric("1e3"), Some(1000.0));
        assert_eq!(normalize_numeric(""), None);
        assert_eq!(normalize_numeric("$"), None);
        assert_eq!(normalize_numeric("$$5"), None);
        assert_eq!(normalize_numeric("1,23"), None);
        assert_eq!(normalize_numeric("12,345,67"), None);
        assert_eq!(normalize_numeric("inf"), None);
        assert_eq!(normalize_numeric("1e400"), None);
        assert_eq!(normalize_numeric("NaN"), None);
        assert_eq!(normalize_numeric("5%%"), None);
        assert_eq!(normalize_numeric("1 000"), None);
        assert_eq!(normalize_numeric("--5"), None);
    }

    #[test]
    fn cell_json_rederives_number() {
        let c: Cell = serde_json::from_str(r#"{"raw":"12%","number":99}"#).unwrap();
        assert_eq!(c.numeric(), Some(12.0));
        assert_eq!(serde_json::to_string(&Cell::new("x")).unwrap(), r#"{"raw":"x"}"#);
    }
}
