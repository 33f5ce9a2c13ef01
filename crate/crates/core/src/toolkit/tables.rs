//! Delimited report tables with a JSON sidecar describing their schema.
//!
//! `name.csv` holds a header row and one record per line; `name.csv.json`
//! lists the columns (name, type, unit) and run metadata. Tables can be
//! checked against their own sidecar with [`validate_table`].

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::write_atomic;
use crate::{Error, Result};

pub const SIDECAR_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnType {
    Integer,
    Float,
    Bool,
    Text,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    #[serde(rename = "type")]
    pub kind: ColumnType,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub unit: String,
}

impl Column {
    pub fn new(name: &str, kind: ColumnType, unit: &str) -> Self {
        Self {
            name: name.into(),
            kind,
            unit: unit.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Bool(bool),
    Text(String),
}

impl Cell {
    fn kind(&self) -> ColumnType {
        match self {
            Cell::Int(_) => ColumnType::Integer,
            Cell::Float(_) => ColumnType::Float,
            Cell::Bool(_) => ColumnType::Bool,
            Cell::Text(_) => ColumnType::Text,
        }
    }

    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => v.to_string(),
            Cell::Bool(v) => v.to_string(),
            Cell::Text(v) => v.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.into())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub description: String,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, description: &str, columns: Vec<Column>) -> Self {
        Self {
            name: name.into(),
            description: description.into(),
            columns,
            rows: Vec::new(),
        }
    }

    /// Appends a row; panics on a column count or type mismatch, which is a
    /// programming error in the table's producer.
    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width for table {}", self.name);
        for (cell, col) in row.iter().zip(&self.columns) {
            assert_eq!(cell.kind(), col.kind, "column {} of table {}", col.name, self.name);
        }
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        w.write_record(self.columns.iter().map(|c| c.name.as_str()))?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.into_inner().map_err(|e| Error::Io(e.into_error()))
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }
}

/// Run context written into every sidecar.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub generator: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl RunInfo {
    pub fn new(seed: Option<u64>, scenario: Option<String>) -> Self {
        Self {
            generator: concat!("sounder ", env!("CARGO_PKG_VERSION")).into(),
            seed,
            scenario,
            notes: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub schema_version: u32,
    pub table: String,
    pub description: String,
    pub format: String,
    pub columns: Vec<Column>,
    pub rows: usize,
    pub run: RunInfo,
}

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    let mut s = csv_path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes `dir/<table.name>.csv` and its sidecar, each atomically.
pub fn write_table(dir: &Path, table: &Table, run: &RunInfo) -> Result<PathBuf> {
    let path = dir.join(format!("{}.csv", table.name));
    let sidecar = Sidecar {
        schema_version: SIDECAR_SCHEMA_VERSION,
        table: table.name.clone(),
        description: table.description.clone(),
        format: "csv, comma-delimited, header row".into(),
        columns: table.columns.clone(),
        rows: table.len(),
        run: run.clone(),
    };
    write_atomic(&path, &table.to_csv()?)?;
    let mut json = serde_json::to_vec_pretty(&sidecar)?;
    json.push(b'\n');
    write_atomic(&sidecar_path(&path), &json)?;
    Ok(path)
}

/// Checks a table against its sidecar: header, row count and cell types.
/// Returns the number of data rows.
pub fn validate_table(csv_path: &Path) -> Result<usize> {
    let sidecar: Sidecar = serde_json::from_slice(&std::fs::read(sidecar_path(csv_path))?)?;
    if sidecar.schema_version != SIDECAR_SCHEMA_VERSION {
        return Err(Error::Format(format!("sidecar schema version {}", sidecar.schema_version)));
    }
    let mut r = csv::Reader::from_path(csv_path)?;
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    let expected: Vec<&str> = sidecar.columns.iter().map(|c| c.name.as_str()).collect();
    if header != expected {
        return Err(Error::Format(format!("{}: header {header:?}, schema {expected:?}", csv_path.display())));
    }
    let mut rows = 0;
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        for (value, col) in rec.iter().zip(&sidecar.columns) {
            let ok = match col.kind {
                ColumnType::Integer => value.parse::<i64>().is_ok(),
                ColumnType::Float => value.parse::<f64>().is_ok(),
                ColumnType::Bool => value.parse::<bool>().is_ok(),
                ColumnType::Text => true,
            };
            if !ok {
                return Err(Error::Format(format!(
                    "{} row {}: {:?} is not a valid {:?} for column {}",
                    csv_path.display(),
                    line + 1,
                    value,
                    col.kind,
                    col.name
                )));
            }
        }
        rows += 1;
    }
    if rows != sidecar.rows {
        return Err(Error::Format(format!(
            "{}: {rows} rows, sidecar announces {}",
            csv_path.display(),
            sidecar.rows
        )));
    }
    Ok(rows)
}

/// Reads one numeric column of a CSV file with a header row.
pub fn read_column(path: &Path, column: &str) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path)?;
    let idx = r
        .headers()?
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| Error::InvalidParameter(format!("no column {column:?} in {}", path.display())))?;
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let v = rec.get(idx).unwrap_or("");
        out.push(v.trim().parse::<f64>().map_err(|_| {
            Error::Format(format!("{} row {}: {v:?} is not a number", path.display(), line + 1))
        })?);
    }
    Ok(out)
}
