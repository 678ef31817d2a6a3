//! Reading observation CSVs and writing estimates.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DataMatrix;
use crate::regularize::PrecisionEstimate;

/// Parses a comma-separated numeric table, one observation per line. A first
/// line containing any non-numeric field is taken as a header.
pub fn read_data_csv<R: Read>(input: R) -> Result<(Option<Vec<String>>, DataMatrix)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut header = None;
    let mut values = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for (idx, rec) in reader.records().enumerate() {
        let line = idx + 1;
        let rec = rec.map_err(|e| Error::InvalidInput(format!("line {line}: {e}")))?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if idx == 0 && rec.iter().any(|f| f.parse::<f64>().is_err()) {
            header = Some(rec.iter().map(String::from).collect());
            width = Some(rec.len());
            continue;
        }
        if let Some(w) = width {
            if rec.len() != w {
                return Err(Error::InvalidInput(format!(
                    "line {line}: expected {w} fields, found {}",
                    rec.len()
                )));
            }
        }
        width = Some(rec.len());
        for (col, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                Error::InvalidInput(format!(
                    "line {line}, column {}: cannot parse '{field}' as a number",
                    col + 1
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "line {line}, column {}: non-finite value '{field}'",
                    col + 1
                )));
            }
            values.push(v);
        }
        rows += 1;
    }
    let p = width.unwrap_or(0);
    if rows < 2 || p < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 rows and 2 columns of data, found {rows}x{p}"
        )));
    }
    Ok((header, DataMatrix::from_row_major(rows, p, &values)?))
}

pub fn write_matrix_csv<W: Write>(m: &DMatrix<f64>, header: Option<&[String]>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::InvalidInput(format!("csv write failed: {e}"));
    if let Some(h) = header {
        w.write_record(h).map_err(err)?;
    }
    for row in m.row_iter() {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(err)?;
    }
    w.flush().map_err(|e| Error::InvalidInput(e.to_string()))
}

/// Flat solver diagnostics written next to an estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub pipeline: String,
    pub lambda: f64,
    pub iterations: usize,
    pub kkt_residual: f64,
    pub min_eigenvalue: f64,
    pub edge_count: usize,
    pub converged: bool,
}

impl Diagnostics {
    pub fn new(pipeline: &str, est: &PrecisionEstimate, edge_tol: f64) -> Self {
        Self {
            pipeline: pipeline.to_string(),
            lambda: est.lambda_used,
            iterations: est.outer_iters,
            kkt_residual: est.kkt_residual,
            min_eigenvalue: est.min_eigenvalue,
            edge_count: est.edge_count(edge_tol),
            converged: est.converged,
        }
    }
}
