//! Dataset ingestion. Samples become the columns of the `n × m` data matrix.

use std::fmt;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use augnewton::linalg::{Matrix, Vector};
use augnewton::objective::Link;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Libsvm,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "libsvm" | "svmlight" => Ok(Format::Libsvm),
            other => Err(format!(
                "unknown dataset format `{other}` (expected csv or libsvm)"
            )),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Libsvm => "libsvm",
        })
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("dataset has no samples")]
    Empty,
    #[error("labels must be -1/+1 or 0/1 for the logistic link; found {0}")]
    BadLabel(f64),
}

/// Feature matrix with one column per sample, and the sample labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub a: Matrix,
    pub labels: Vector,
}

impl Dataset {
    pub fn features(&self) -> usize {
        self.a.nrows()
    }

    pub fn samples(&self) -> usize {
        self.a.ncols()
    }

    /// Writes the CSV layout read by [`parse_csv`]: one row per sample,
    /// label last. Floats use the shortest round-trip representation.
    pub fn write_csv<W: Write>(&self, out: W) -> io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for (j, col) in self.a.column_iter().enumerate() {
            let mut row: Vec<String> = col.iter().map(|v| v.to_string()).collect();
            row.push(self.labels[j].to_string());
            w.write_record(&row)?;
        }
        w.flush()
    }
}

pub fn load_dataset(path: &Path, format: Format) -> Result<Dataset, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    match format {
        Format::Csv => parse_csv(&text),
        Format::Libsvm => parse_libsvm(&text, None),
    }
}

fn parse_number(field: &str, line: usize) -> Result<f64, DatasetError> {
    let field = field.trim();
    let v: f64 = field.parse().map_err(|_| DatasetError::Parse {
        line,
        message: format!("`{field}` is not a number"),
    })?;
    if !v.is_finite() {
        return Err(DatasetError::Parse {
            line,
            message: format!("`{field}` is not finite"),
        });
    }
    Ok(v)
}

/// Numeric CSV without header, label in the last column.
pub fn parse_csv(text: &str) -> Result<Dataset, DatasetError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut columns: Vec<f64> = Vec::new();
    let mut labels = Vec::new();
    let mut width: Option<usize> = None;
    for record in reader.records() {
        let record = record.map_err(|e| DatasetError::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        if record.len() < 2 {
            return Err(DatasetError::Parse {
                line,
                message: "need at least one feature and a label".into(),
            });
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(DatasetError::Parse {
                    line,
                    message: format!("expected {w} fields, found {}", record.len()),
                })
            }
            _ => {}
        }
        let values = record
            .iter()
            .map(|f| parse_number(f, line))
            .collect::<Result<Vec<_>, _>>()?;
        let (label, feats) = values.split_last().expect("at least two fields");
        columns.extend_from_slice(feats);
        labels.push(*label);
    }
    let n = width.ok_or(DatasetError::Empty)? - 1;
    Ok(Dataset {
        a: Matrix::from_column_slice(n, labels.len(), &columns),
        labels: Vector::from_vec(labels),
    })
}

/// `label index:value ...` lines with 1-based indices, densified. The
/// feature count is the largest index seen unless given.
pub fn parse_libsvm(text: &str, features: Option<usize>) -> Result<Dataset, DatasetError> {
    let mut rows: Vec<(f64, Vec<(usize, f64)>)> = Vec::new();
    let mut max_index = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label = parse_number(tokens.next().expect("nonempty line"), line)?;
        let mut entries = Vec::new();
        for tok in tokens {
            let (idx, val) = tok.split_once(':').ok_or_else(|| DatasetError::Parse {
                line,
                message: format!("`{tok}` is not index:value"),
            })?;
            let idx: usize = idx.parse().map_err(|_| DatasetError::Parse {
                line,
                message: format!("bad feature index `{idx}`"),
            })?;
            if idx == 0 {
                return Err(DatasetError::Parse {
                    line,
                    message: "feature indices are 1-based".into(),
                });
            }
            max_index = max_index.max(idx);
            entries.push((idx - 1, parse_number(val, line)?));
        }
        rows.push((label, entries));
    }
    if rows.is_empty() {
        return Err(DatasetError::Empty);
    }
    let n = match features {
        Some(n) if n < max_index => {
            return Err(DatasetError::Parse {
                line: 0,
                message: format!("index {max_index} exceeds the declared {n} features"),
            })
        }
        Some(n) => n,
        None => max_index,
    };
    if n == 0 {
        return Err(DatasetError::Empty);
    }
    let mut a = Matrix::zeros(n, rows.len());
    let mut labels = Vector::zeros(rows.len());
    for (j, (label, entries)) in rows.into_iter().enumerate() {
        labels[j] = label;
        for (i, v) in entries {
            a[(i, j)] = v;
        }
    }
    Ok(Dataset { a, labels })
}

/// Labels as the link expects them. For logistic, `{0, 1}` is remapped to
/// `{−1, +1}`; any other value besides `±1` is rejected.
pub fn labels_for_link(labels: &Vector, link: Link) -> Result<Vector, DatasetError> {
    if link != Link::Logistic {
        return Ok(labels.clone());
    }
    if let Some(&bad) = labels.iter().find(|&&y| y != 0.0 && y != 1.0 && y != -1.0) {
        return Err(DatasetError::BadLabel(bad));
    }
    let zero_one = labels.iter().all(|&y| y == 0.0 || y == 1.0);
    if zero_one {
        return Ok(labels.map(|y| if y == 0.0 { -1.0 } else { 1.0 }));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y == 0.0) {
        return Err(DatasetError::BadLabel(bad));
    }
    Ok(labels.clone())
}
