//! Reading and writing run artifacts.
//!
//! Matrices are dense CSV without a header (one matrix row per line) or the
//! binary format of `clipped_mc::linalg::io` when the extension is `.bin`.
//! Observed entries are `row,col,value` CSV with a header. Every other table
//! has a header row.

use std::fmt::Display;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use clipped_mc::linalg::io::{load_matrix, save_matrix};
use clipped_mc::{DenseMatrix, Observation, ObservedEntries};
use serde::Serialize;

use crate::CliError;

fn runtime(path: &Path, e: impl Display) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

/// Buffered writer on `path` that reports errors with the path attached.
pub struct Sink<'a> {
    path: &'a Path,
    w: BufWriter<File>,
}

impl<'a> Sink<'a> {
    pub fn create(path: &'a Path) -> Result<Self, CliError> {
        let file = File::create(path).map_err(|e| runtime(path, e))?;
        Ok(Self { path, w: BufWriter::new(file) })
    }

    pub fn line(&mut self, text: impl Display) -> Result<(), CliError> {
        writeln!(self.w, "{text}").map_err(|e| runtime(self.path, e))
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.w.flush().map_err(|e| runtime(self.path, e))
    }
}

/// Writes a header and rows of already formatted cells.
pub fn write_table(path: &Path, header: &str, rows: impl IntoIterator<Item = String>) -> Result<(), CliError> {
    let mut sink = Sink::create(path)?;
    sink.line(header)?;
    for row in rows {
        sink.line(row)?;
    }
    sink.finish()
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| runtime(path, e))?;
    fs::write(path, text + "\n").map_err(|e| runtime(path, e))
}

pub fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| runtime(path, e))
}

pub fn write_matrix_csv(path: &Path, m: &DenseMatrix) -> Result<(), CliError> {
    let mut sink = Sink::create(path)?;
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(f64::to_string).collect();
        sink.line(row.join(","))?;
    }
    sink.finish()
}

pub fn save_matrix_bin(path: &Path, m: &DenseMatrix) -> Result<(), CliError> {
    save_matrix(path, m).map_err(|e| runtime(path, e))
}

/// Loads a matrix from dense CSV, or from the binary format for `.bin` files.
pub fn read_matrix(path: &Path) -> Result<DenseMatrix, CliError> {
    if path.extension().is_some_and(|e| e == "bin") {
        return load_matrix(path).map_err(|e| runtime(path, e));
    }
    let reader = BufReader::new(File::open(path).map_err(|e| runtime(path, e))?);
    let mut rows = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| runtime(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| runtime(path, format!("line {}: {e}", n + 1)))?;
        rows.push(row);
    }
    DenseMatrix::from_rows(&rows).map_err(|e| runtime(path, e))
}

pub fn write_entries(path: &Path, obs: &ObservedEntries) -> Result<(), CliError> {
    write_table(
        path,
        "row,col,value",
        obs.entries().iter().map(|e| format!("{},{},{}", e.row, e.col, e.value)),
    )
}

/// Reads `row,col,value` CSV (header optional) into entries of the given shape.
pub fn read_entries(path: &Path, rows: usize, cols: usize) -> Result<ObservedEntries, CliError> {
    let reader = BufReader::new(File::open(path).map_err(|e| runtime(path, e))?);
    let mut entries = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| runtime(path, e))?;
        let line = line.trim();
        if line.is_empty() || (n == 0 && line.starts_with("row")) {
            continue;
        }
        let bad = || runtime(path, format!("line {}: expected `row,col,value`, got `{line}`", n + 1));
        let mut it = line.split(',').map(str::trim);
        let (Some(i), Some(j), Some(v), None) = (it.next(), it.next(), it.next(), it.next()) else {
            return Err(bad());
        };
        entries.push(Observation {
            row: i.parse().map_err(|_| bad())?,
            col: j.parse().map_err(|_| bad())?,
            value: v.parse().map_err(|_| bad())?,
        });
    }
    ObservedEntries::new(rows, cols, entries.into_iter().map(|e| (e.row, e.col, e.value)), None)
        .map_err(|e| runtime(path, e))
}

/// Reads a headed CSV table into its header and rows of cells.
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), CliError> {
    let text = fs::read_to_string(path).map_err(|e| runtime(path, e))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = match lines.next() {
        Some(h) => h.split(',').map(str::to_string).collect(),
        None => return Err(runtime(path, "empty table")),
    };
    let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    Ok((header, rows))
}

/// Column lookup by header name.
pub fn column(path: &Path, header: &[String], name: &str) -> Result<usize, CliError> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| runtime(path, format!("missing column `{name}`")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let m = DenseMatrix::from_rows(&[vec![1.0, 0.1 + 0.2], vec![-3.5, 1e-300]]).unwrap();
        write_matrix_csv(&path, &m).unwrap();
        assert_eq!(read_matrix(&path).unwrap(), m);
    }

    #[test]
    fn entries_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.csv");
        let obs = ObservedEntries::new(3, 4, [(0, 1, 2.5), (2, 3, -1.0)], None).unwrap();
        write_entries(&path, &obs).unwrap();
        assert_eq!(read_entries(&path, 3, 4).unwrap(), obs);
        assert!(read_entries(&path, 2, 2).is_err());
    }

    #[test]
    fn malformed_entries_name_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.csv");
        fs::write(&path, "row,col,value\n0,0,1\n0,x,2\n").unwrap();
        let err = read_entries(&path, 2, 2).unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
    }
}
