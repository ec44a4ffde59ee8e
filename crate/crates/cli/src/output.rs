//! Deterministic tabular artifacts (CSV or JSONL) and the run summary.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::Format;
use crate::RunError;

/// One table value; floats get a fixed scientific rendering in CSV so that
/// reruns are byte-identical.
#[derive(Clone, Debug)]
pub enum Cell {
    Text(String),
    Int(i64),
    Float(f64),
    Bool(bool),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Int(i) => i.to_string(),
            Cell::Float(x) => format_float(*x),
            Cell::Bool(b) => b.to_string(),
        }
    }

    fn json(&self) -> serde_json::Value {
        match self {
            Cell::Text(s) => serde_json::Value::from(s.as_str()),
            Cell::Int(i) => serde_json::Value::from(*i),
            Cell::Float(x) => serde_json::Value::from(*x),
            Cell::Bool(b) => serde_json::Value::from(*b),
        }
    }
}

/// Floats in CSV artifacts use Rust's shortest round-trip formatting, so
/// parsing the cell back recovers the exact bit pattern.
pub fn format_float(x: f64) -> String {
    format!("{x}")
}

/// A named columnar artifact.
#[derive(Clone, Debug)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len(), "ragged row in {}", self.name);
        self.rows.push(row);
    }

    /// Write the table into `dir` and return the file path.
    pub fn write(&self, dir: &Path, format: Format) -> Result<PathBuf, RunError> {
        let path = dir.join(format!("{}.{}", self.name, format.extension()));
        let file = File::create(&path)
            .map_err(|e| RunError::run(format!("cannot write {}: {e}", path.display())))?;
        let mut out = BufWriter::new(file);
        match format {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(out);
                w.write_record(&self.columns)
                    .map_err(|e| RunError::run(format!("{}: {e}", path.display())))?;
                for row in &self.rows {
                    let rec: Vec<String> = row.iter().map(Cell::csv).collect();
                    w.write_record(&rec)
                        .map_err(|e| RunError::run(format!("{}: {e}", path.display())))?;
                }
                w.flush().map_err(|e| RunError::run(format!("{}: {e}", path.display())))?;
            }
            Format::Jsonl => {
                for row in &self.rows {
                    let mut obj = serde_json::Map::new();
                    for (col, cell) in self.columns.iter().zip(row) {
                        obj.insert(col.clone(), cell.json());
                    }
                    serde_json::to_writer(&mut out, &serde_json::Value::Object(obj))
                        .map_err(|e| RunError::run(format!("{}: {e}", path.display())))?;
                    out.write_all(b"\n")
                        .map_err(|e| RunError::run(format!("{}: {e}", path.display())))?;
                }
                out.flush().map_err(|e| RunError::run(format!("{}: {e}", path.display())))?;
            }
        }
        Ok(path)
    }
}

/// One named pass/fail check with its measured value.
#[derive(Clone, Debug, Serialize)]
pub struct CheckRow {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl CheckRow {
    /// A residual-style check: passes when `value <= threshold`.
    pub fn residual(name: &str, value: f64, threshold: f64) -> Self {
        CheckRow {
            name: name.to_string(),
            value,
            threshold,
            passed: value.is_finite() && value <= threshold,
        }
    }

    /// A predicate-style check with a reported magnitude.
    pub fn flag(name: &str, passed: bool, value: f64) -> Self {
        CheckRow { name: name.to_string(), value, threshold: f64::NAN, passed }
    }
}

/// Per-run summary written as `summary.json` next to the tables.
#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub subcommand: String,
    pub surface: Option<String>,
    pub seed: u64,
    pub checks: Vec<CheckRow>,
    pub all_passed: bool,
    pub artifacts: Vec<String>,
}

impl Summary {
    pub fn write(&self, dir: &Path) -> Result<PathBuf, RunError> {
        let path = dir.join("summary.json");
        let file = File::create(&path)
            .map_err(|e| RunError::run(format!("cannot write {}: {e}", path.display())))?;
        let mut out = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut out, self)
            .map_err(|e| RunError::run(format!("{}: {e}", path.display())))?;
        out.write_all(b"\n")
            .map_err(|e| RunError::run(format!("{}: {e}", path.display())))?;
        out.flush().map_err(|e| RunError::run(format!("{}: {e}", path.display())))?;
        Ok(path)
    }
}
