//! Curve CSV ingestion and artifact readers/writers.
//!
//! Curve files hold the grid abscissae on the first row and one curve per
//! following row, comma separated. Floats are written in shortest
//! round-trip form, so every artifact parses back to identical values.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use fdensity::{FunctionalSample, Grid};

use crate::error::{CliError, CliResult};

pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn parse_cell(cell: &str, line: u64, column: usize) -> CliResult<f64> {
    let v: f64 = cell
        .trim()
        .parse()
        .map_err(|_| CliError::input(format!("line {line}, column {column}: cannot parse '{cell}' as a number")))?;
    if !v.is_finite() {
        return Err(CliError::input(format!("line {line}, column {column}: value '{cell}' is not finite")));
    }
    Ok(v)
}

/// Parses the curve CSV format.
pub fn parse_curves(text: &str) -> CliResult<FunctionalSample<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut grid: Option<(Vec<f64>, u64)> = None;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            CliError::input(format!("line {line}: {e}"))
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(|c| c.trim().is_empty()) {
            continue;
        }
        let values = record
            .iter()
            .enumerate()
            .map(|(k, c)| parse_cell(c, line, k + 1))
            .collect::<CliResult<Vec<f64>>>()?;
        match &grid {
            None => grid = Some((values, line)),
            Some((g, _)) if values.len() != g.len() => {
                return Err(CliError::input(format!(
                    "line {line}: expected {} values to match the grid row, found {}",
                    g.len(),
                    values.len()
                )))
            }
            Some(_) => rows.push(values),
        }
    }
    let (points, line) = grid.ok_or_else(|| {
        CliError::input("missing header row: the first line must list the grid abscissae")
    })?;
    let grid = Grid::new(points).map_err(|e| CliError::input(format!("line {line}: {e}")))?;
    if rows.len() < 2 {
        return Err(CliError::input(format!("need at least 2 curves after the grid row, found {}", rows.len())));
    }
    Ok(FunctionalSample::new(grid, rows)?)
}

pub fn read_curves(path: &Path) -> CliResult<FunctionalSample<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_curves(&text).map_err(|e| match e {
        CliError::Input(msg) => CliError::Input(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Writes a sample in the curve CSV format.
pub fn write_curves(path: &Path, sample: &FunctionalSample<f64>) -> CliResult<()> {
    let header: Vec<String> = sample.grid().points().iter().map(|&v| fmt_f64(v)).collect();
    let rows = sample.rows().map(|r| r.iter().map(|&v| fmt_f64(v)).collect()).collect();
    write_rows(path, None, &[header], rows)
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::input(format!("{}: {other:?}", path.display())),
    }
}

fn write_rows(path: &Path, header: Option<&[&str]>, lead: &[Vec<String>], rows: Vec<Vec<String>>) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(BufWriter::new(file));
    if let Some(h) = header {
        w.write_record(h).map_err(|e| csv_error(path, e))?;
    }
    for r in lead.iter().chain(&rows) {
        w.write_record(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Writes a table with a header row.
pub fn write_table(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> CliResult<()> {
    write_rows(path, Some(header), &[], rows)
}

/// A CSV table read back as strings.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// A column parsed as floats.
    pub fn column_f64(&self, name: &str) -> CliResult<Vec<f64>> {
        let k = self
            .column_index(name)
            .ok_or_else(|| CliError::input(format!("no column '{name}'")))?;
        self.rows
            .iter()
            .map(|r| {
                r[k].parse::<f64>()
                    .map_err(|_| CliError::input(format!("column '{name}': cannot parse '{}'", r[k])))
            })
            .collect()
    }
}

pub fn read_table(path: &Path) -> CliResult<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.iter().map(String::from).collect();
    let rows = reader
        .records()
        .map(|r| r.map(|rec| rec.iter().map(String::from).collect()))
        .collect::<Result<Vec<Vec<String>>, _>>()
        .map_err(|e| csv_error(path, e))?;
    Ok(Table { header, rows })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    w.write_all(b"\n").map_err(|e| CliError::io(path, e))?;
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}
