//! Snapshot JSON and the fixed-format CSV writer used for every table.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{CurveSnapshot, SnapshotRecord};

pub fn snapshot_to_json(snap: &CurveSnapshot) -> String {
    let mut s = serde_json::to_string(&snap.to_record()).expect("records always serialize");
    s.push('\n');
    s
}

pub fn snapshot_from_json(text: &str) -> Result<CurveSnapshot> {
    let rec: SnapshotRecord = serde_json::from_str(text)?;
    CurveSnapshot::from_record(rec)
}

pub fn write_snapshot(path: &Path, snap: &CurveSnapshot) -> Result<()> {
    write_text(path, &snapshot_to_json(snap))
}

pub fn read_snapshot(path: &Path) -> Result<CurveSnapshot> {
    snapshot_from_json(&read_text(path)?)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

/// Shortest representation that parses back to the same double; scientific
/// notation outside [1e-4, 1e15).
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// A CSV cell: numbers at full precision, missing values as empty cells.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Missing,
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}
impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Missing, Cell::Num)
    }
}
impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}
impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}
impl From<Option<i64>> for Cell {
    fn from(v: Option<i64>) -> Self {
        v.map_or(Cell::Missing, Cell::Int)
    }
}

pub fn csv(header: &[String], rows: &[Vec<Cell>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&csv_row(row));
    }
    out
}

/// One CSV line, newline included.
pub fn csv_row(row: &[Cell]) -> String {
    let mut out = String::new();
    for (k, c) in row.iter().enumerate() {
        if k > 0 {
            out.push(',');
        }
        match c {
            Cell::Num(v) => out.push_str(&fmt_f64(*v)),
            Cell::Int(v) => write!(out, "{v}").unwrap(),
            Cell::Missing => {}
            Cell::Text(s) => out.push_str(s),
        }
    }
    out.push('\n');
    out
}

/// Numeric CSV row; empty cells are `None`.
pub type CsvRow = Vec<Option<f64>>;

/// Parse a CSV produced by [`csv`] into header and rows of optional numbers.
pub fn parse_csv(text: &str) -> Result<(Vec<String>, Vec<CsvRow>)> {
    let mut lines = text.lines();
    let header: Vec<String> =
        lines.next().ok_or_else(|| Error::InsufficientSamples("empty CSV".into()))?.split(',').map(str::to_string).collect();
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let row: Vec<Option<f64>> = line
            .split(',')
            .map(|c| if c.is_empty() { Ok(None) } else { c.parse::<f64>().map(Some) })
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::param(format!("CSV line {}: {e}", k + 2)))?;
        if row.len() != header.len() {
            return Err(Error::param(format!("CSV line {}: {} cells, header has {}", k + 2, row.len(), header.len())));
        }
        rows.push(row);
    }
    Ok((header, rows))
}
