//! CSV ingestion.
//!
//! The first line is a header. A `label` column is required, an `id`
//! column is ignored and every other column is a real-valued feature.

use std::collections::BTreeSet;
use std::io::Read;
use std::path::Path;

use thiserror::Error;
use vrsim_core::data::Provenance;
use vrsim_core::{Dataset, Sample};

#[derive(Debug, Error, PartialEq)]
pub enum CsvError {
    #[error("missing required column `label`")]
    NoLabel,
    #[error("no feature columns")]
    NoFeatures,
    #[error("row {row}, column `{column}`: {reason}")]
    Cell { row: usize, column: String, reason: String },
    #[error("row {row}: {reason}")]
    Row { row: usize, reason: String },
    #[error("{0}")]
    Other(String),
}

/// Loads and normalizes a dataset. Rows are numbered from 1 after the
/// header.
pub fn load_csv(path: &Path) -> Result<Dataset, CsvError> {
    let file = std::fs::File::open(path).map_err(|e| CsvError::Other(format!("{}: {e}", path.display())))?;
    parse_csv(file)
}

/// Labels with exactly two distinct values map to 0 (smaller) and 1
/// (larger), comparing numerically when both parse. Otherwise non-negative
/// integer labels are kept and any other label set is indexed in sorted
/// order.
pub fn parse_csv<R: Read>(reader: R) -> Result<Dataset, CsvError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| CsvError::Other(e.to_string()))?.clone();
    let label_col = headers.iter().position(|h| h == "label").ok_or(CsvError::NoLabel)?;
    let features: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter(|(i, h)| *i != label_col && *h != "id")
        .map(|(i, h)| (i, h.to_string()))
        .collect();
    if features.is_empty() {
        return Err(CsvError::NoFeatures);
    }

    let mut rows = Vec::new();
    let mut raw_labels = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| CsvError::Row { row, reason: e.to_string() })?;
        let mut x = Vec::with_capacity(features.len());
        for (col, name) in &features {
            let cell = record.get(*col).unwrap_or("");
            if cell.is_empty() {
                return Err(CsvError::Cell { row, column: name.clone(), reason: "missing value".into() });
            }
            let v: f64 = cell.parse().map_err(|_| CsvError::Cell {
                row,
                column: name.clone(),
                reason: format!("`{cell}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(CsvError::Cell { row, column: name.clone(), reason: "non-finite value".into() });
            }
            x.push(v);
        }
        let label = record.get(label_col).unwrap_or("");
        if label.is_empty() {
            return Err(CsvError::Cell { row, column: "label".into(), reason: "missing value".into() });
        }
        raw_labels.push(label.to_string());
        rows.push(x);
    }
    if rows.is_empty() {
        return Err(CsvError::Other("no data rows".into()));
    }

    let labels = map_labels(&raw_labels);
    let samples = rows.into_iter().zip(labels).map(|(x, y)| Sample::new(x, y)).collect();
    Ok(Dataset::new(samples, Provenance::Csv).map_err(|e| CsvError::Other(e.to_string()))?.normalized())
}

fn map_labels(raw: &[String]) -> Vec<f64> {
    let numeric: Option<Vec<f64>> = raw.iter().map(|s| s.parse::<f64>().ok()).collect();
    let distinct: BTreeSet<&str> = raw.iter().map(String::as_str).collect();
    if let Some(values) = &numeric {
        let mut uniq: Vec<f64> = values.clone();
        uniq.sort_by(f64::total_cmp);
        uniq.dedup();
        if uniq.len() == 2 {
            return values.iter().map(|v| if *v == uniq[0] { 0.0 } else { 1.0 }).collect();
        }
        if values.iter().all(|v| *v >= 0.0 && v.fract() == 0.0) {
            return values.clone();
        }
        return values.iter().map(|v| uniq.iter().position(|u| u == v).unwrap() as f64).collect();
    }
    let order: Vec<&str> = distinct.into_iter().collect();
    raw.iter().map(|s| order.iter().position(|o| o == s).unwrap() as f64).collect()
}
