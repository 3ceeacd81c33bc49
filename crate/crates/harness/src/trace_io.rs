//! CSV trace files.
//!
//! `<solver>.trace.csv` has the fixed header
//! `k,f,gap,grad_norm,rho,step_norm_G,lyapunov,elapsed_ns`; `gap` and
//! `lyapunov` are empty when unknown. `<solver>.iterates.csv` has header
//! `k,x0,…,x{n-1}` and stores the iterates themselves, so a trace can be
//! re-certified later. Floats are written in shortest round-trip form.

use std::fs::File;
use std::io::{self, BufWriter};
use std::path::Path;

use augnewton::linalg::Vector;
use augnewton::solvers::{IterateRecord, IterateTrace, Method, Termination};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const TRACE_HEADER: [&str; 8] = [
    "k",
    "f",
    "gap",
    "grad_norm",
    "rho",
    "step_norm_G",
    "lyapunov",
    "elapsed_ns",
];

#[derive(Debug, Error)]
pub enum TraceError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("malformed trace: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub k: usize,
    pub f: f64,
    pub gap: Option<f64>,
    pub grad_norm: f64,
    pub rho: f64,
    #[serde(rename = "step_norm_G")]
    pub step_norm_g: f64,
    pub lyapunov: Option<f64>,
    pub elapsed_ns: u64,
}

impl TraceRow {
    pub fn from_record(r: &IterateRecord, f_star: Option<f64>) -> Self {
        Self {
            k: r.k,
            f: r.f,
            gap: f_star.map(|fs| r.f - fs),
            grad_norm: r.grad_norm,
            rho: r.rho,
            step_norm_g: r.step_norm_g,
            lyapunov: r.lyapunov,
            elapsed_ns: r.elapsed_ns,
        }
    }
}

pub fn write_trace(path: &Path, trace: &IterateTrace) -> Result<(), TraceError> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    for r in &trace.records {
        w.serialize(TraceRow::from_record(r, trace.f_star))?;
    }
    if trace.records.is_empty() {
        w.write_record(TRACE_HEADER)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_iterates(path: &Path, trace: &IterateTrace) -> Result<(), TraceError> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    let n = trace.records.first().map_or(0, |r| r.x.len());
    let mut header = vec!["k".to_string()];
    header.extend((0..n).map(|i| format!("x{i}")));
    w.write_record(&header)?;
    for r in &trace.records {
        let mut row = vec![r.k.to_string()];
        row.extend(r.x.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a trace file, checking the header and that `k` runs 0, 1, 2, ….
pub fn read_trace(path: &Path) -> Result<Vec<TraceRow>, TraceError> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != TRACE_HEADER {
        return Err(TraceError::Malformed(format!(
            "unexpected header {header:?}"
        )));
    }
    let rows = r.deserialize().collect::<Result<Vec<TraceRow>, _>>()?;
    if let Some((i, row)) = rows.iter().enumerate().find(|(i, row)| row.k != *i) {
        return Err(TraceError::Malformed(format!("row {i} has k = {}", row.k)));
    }
    Ok(rows)
}

pub fn read_iterates(path: &Path) -> Result<Vec<Vector>, TraceError> {
    let mut r = csv::Reader::from_path(path)?;
    let width = r.headers()?.len();
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != width || rec.get(0) != Some(i.to_string().as_str()) {
            return Err(TraceError::Malformed(format!("iterate row {i}")));
        }
        let x = rec
            .iter()
            .skip(1)
            .map(|v| v.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| TraceError::Malformed(format!("iterate row {i}: {e}")))?;
        out.push(Vector::from_vec(x));
    }
    Ok(out)
}

/// Rebuilds an [`IterateTrace`] from its two files.
pub fn load_trace(
    trace_path: &Path,
    iterates_path: &Path,
    method: Method,
    termination: Termination,
    f_star: Option<f64>,
) -> Result<IterateTrace, TraceError> {
    let rows = read_trace(trace_path)?;
    let xs = read_iterates(iterates_path)?;
    if rows.len() != xs.len() {
        return Err(TraceError::Malformed(format!(
            "{} trace rows but {} iterates",
            rows.len(),
            xs.len()
        )));
    }
    let records = rows
        .into_iter()
        .zip(xs)
        .map(|(row, x)| IterateRecord {
            k: row.k,
            x,
            f: row.f,
            grad_norm: row.grad_norm,
            rho: row.rho,
            step_norm_g: row.step_norm_g,
            lyapunov: row.lyapunov,
            elapsed_ns: row.elapsed_ns,
        })
        .collect();
    Ok(IterateTrace {
        method,
        records,
        termination,
        f_star,
    })
}
