//! CSV input/output and file digests.
//!
//! Matrices are plain numeric CSV, one time step per row, one experiment
//! per column. A single leading header row is tolerated (detected by
//! failing to parse as numbers) and skipped; everything after it must be
//! finite, nonnegative numbers in a rectangular layout.

use firdiv_core::{ImpulseResponse, NonnegMatrix};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::Path;

pub fn read_matrix(path: &Path) -> Result<NonnegMatrix, String> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| format!("{}: {e}", path.display()))?;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut cols = 0usize;
    for (index, record) in reader.records().enumerate() {
        let line = index + 1;
        let record = record.map_err(|e| format!("{}: {e}", path.display()))?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let mut parsed = Vec::with_capacity(record.len());
        for (c, field) in record.iter().enumerate() {
            match field.parse::<f64>() {
                Ok(v) if v.is_finite() && v >= 0.0 => parsed.push(v),
                Ok(v) => {
                    return Err(format!(
                        "{} line {line} column {}: entry {v} is not a finite nonnegative number",
                        path.display(),
                        c + 1
                    ))
                }
                Err(_) if index == 0 => {
                    // Non-numeric first row: header, skip it entirely.
                    parsed.clear();
                    break;
                }
                Err(_) => {
                    return Err(format!(
                        "{} line {line} column {}: cannot parse '{field}' as a number",
                        path.display(),
                        c + 1
                    ))
                }
            }
        }
        if parsed.is_empty() {
            continue;
        }
        if cols == 0 {
            cols = parsed.len();
        } else if parsed.len() != cols {
            return Err(format!(
                "{} line {line}: expected {cols} columns, found {}",
                path.display(),
                parsed.len()
            ));
        }
        rows.push(parsed);
    }
    if rows.is_empty() {
        return Err(format!("{}: no data rows", path.display()));
    }
    NonnegMatrix::from_rows(&rows).map_err(|e| format!("{}: {e}", path.display()))
}

/// Reads an impulse response from CSV: either a single column or a single
/// row of numbers.
pub fn read_response(path: &Path) -> Result<ImpulseResponse, String> {
    let m = read_matrix(path)?;
    let values: Vec<f64> = if m.cols() == 1 {
        (0..m.rows()).map(|i| m.get(i, 0)).collect()
    } else if m.rows() == 1 {
        (0..m.cols()).map(|j| m.get(0, j)).collect()
    } else {
        return Err(format!(
            "{}: a response must be a single row or column, got {}x{}",
            path.display(),
            m.rows(),
            m.cols()
        ));
    };
    ImpulseResponse::new(values).map_err(|e| format!("{}: {e}", path.display()))
}

pub fn write_matrix(path: &Path, m: &NonnegMatrix) -> Result<(), String> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| format!("{}: {e}", path.display()))?;
    for i in 0..m.rows() {
        let record: Vec<String> = (0..m.cols()).map(|j| m.get(i, j).to_string()).collect();
        writer
            .write_record(&record)
            .map_err(|e| format!("{}: {e}", path.display()))?;
    }
    writer.flush().map_err(|e| format!("{}: {e}", path.display()))
}

pub fn sha256_hex(path: &Path) -> Result<String, String> {
    let bytes = std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let digest = Sha256::digest(&bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    Ok(out)
}
