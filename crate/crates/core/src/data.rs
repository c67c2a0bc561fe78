//! Dataset representation, delimited-file ingestion, and column standardization.
//!
//! Standardization uses the population (divide-by-n) convention so that every
//! active column x satisfies xᵀx = n. Columns whose raw variance falls at or
//! below the screening threshold are deactivated and zeroed, which downstream
//! modules treat as an infinite penalty: those features can never be selected.

use std::collections::HashSet;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{PlmmError, Result};

/// Raw-variance threshold below which a column is screened out as near-constant.
pub const DEFAULT_VARIANCE_THRESHOLD: f64 = 1e-10;

/// A design matrix with outcome, as read from a delimited file.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
    pub feature_names: Vec<String>,
    pub row_ids: Vec<String>,
    pub outcome_name: String,
}

impl Dataset {
    pub fn new(
        x: Array2<f64>,
        y: Array1<f64>,
        feature_names: Vec<String>,
        row_ids: Vec<String>,
        outcome_name: String,
    ) -> Result<Self> {
        let (n, p) = x.dim();
        if n < 2 {
            return Err(PlmmError::TooFewRows(n));
        }
        if p == 0 {
            return Err(PlmmError::NoFeatures);
        }
        if y.len() != n {
            return Err(PlmmError::DimensionMismatch {
                what: "outcome length",
                expected: n,
                got: y.len(),
            });
        }
        if feature_names.len() != p {
            return Err(PlmmError::DimensionMismatch {
                what: "feature names",
                expected: p,
                got: feature_names.len(),
            });
        }
        if row_ids.len() != n {
            return Err(PlmmError::DimensionMismatch {
                what: "row ids",
                expected: n,
                got: row_ids.len(),
            });
        }
        let mut seen = HashSet::new();
        for name in &feature_names {
            if !seen.insert(name.as_str()) {
                return Err(PlmmError::DuplicateFeature(name.clone()));
            }
        }
        for (i, row) in x.rows().into_iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(PlmmError::NonFiniteCell {
                        row: row_ids[i].clone(),
                        column: feature_names[j].clone(),
                    });
                }
            }
        }
        for (i, v) in y.iter().enumerate() {
            if !v.is_finite() {
                return Err(PlmmError::NonFiniteCell {
                    row: row_ids[i].clone(),
                    column: outcome_name.clone(),
                });
            }
        }
        Ok(Dataset {
            x,
            y,
            feature_names,
            row_ids,
            outcome_name,
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }
}

/// A numeric matrix together with the per-column centers/scales that produced
/// it and the active mask from variance screening.
#[derive(Debug, Clone)]
pub struct StandardizedMatrix {
    pub values: Array2<f64>,
    pub centers: Array1<f64>,
    pub scales: Array1<f64>,
    pub active: Vec<bool>,
}

impl StandardizedMatrix {
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn n_active(&self) -> usize {
        self.active.iter().filter(|a| **a).count()
    }

    pub fn active_indices(&self) -> Vec<usize> {
        self.active
            .iter()
            .enumerate()
            .filter_map(|(j, a)| a.then_some(j))
            .collect()
    }

    /// Rows restricted to the active columns, as an owned matrix.
    pub fn active_values(&self) -> Array2<f64> {
        self.values.select(Axis(1), &self.active_indices())
    }
}

/// Center and scale each column by its mean and divide-by-n standard
/// deviation. Columns with raw variance <= `variance_threshold` are marked
/// inactive and zeroed; their raw (near-zero) standard deviation is still
/// recorded in `scales`.
pub fn standardize(x: ArrayView2<'_, f64>, variance_threshold: f64) -> Result<StandardizedMatrix> {
    let (n, p) = x.dim();
    if n < 2 {
        return Err(PlmmError::TooFewRows(n));
    }
    if variance_threshold < 0.0 {
        return Err(PlmmError::InvalidArgument(format!(
            "variance_threshold must be >= 0, got {variance_threshold}"
        )));
    }
    let nf = n as f64;
    let mut values = Array2::zeros((n, p));
    let mut centers = Array1::zeros(p);
    let mut scales = Array1::zeros(p);
    let mut active = vec![false; p];
    for j in 0..p {
        let col = x.column(j);
        let mean = col.sum() / nf;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / nf;
        let sd = var.sqrt();
        centers[j] = mean;
        scales[j] = sd;
        if var > variance_threshold {
            active[j] = true;
            let mut out = values.column_mut(j);
            for (o, v) in out.iter_mut().zip(col.iter()) {
                *o = (v - mean) / sd;
            }
        }
    }
    Ok(StandardizedMatrix {
        values,
        centers,
        scales,
        active,
    })
}

/// Apply training-stage centers/scales to new rows. Inactive columns are
/// zeroed. Columns of the result need not have mean zero: the training
/// parameters are applied verbatim.
pub fn apply_standardization(
    x_new: ArrayView2<'_, f64>,
    centers: ArrayView1<'_, f64>,
    scales: ArrayView1<'_, f64>,
    active: &[bool],
) -> Result<Array2<f64>> {
    let (m, p) = x_new.dim();
    if p != centers.len() || p != scales.len() || p != active.len() {
        return Err(PlmmError::DimensionMismatch {
            what: "standardization columns",
            expected: centers.len(),
            got: p,
        });
    }
    let mut out = Array2::zeros((m, p));
    for j in 0..p {
        if !active[j] {
            continue;
        }
        let c = centers[j];
        let s = scales[j];
        let col = x_new.column(j);
        let mut o = out.column_mut(j);
        for (oi, v) in o.iter_mut().zip(col.iter()) {
            *oi = (v - c) / s;
        }
    }
    Ok(out)
}

fn parse_table(path: &Path, delimiter: u8) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => PlmmError::Io {
                path: path.to_path_buf(),
                source: std::io::Error::other(e.to_string()),
            },
            _ => PlmmError::MalformedFile {
                path: path.to_path_buf(),
                message: e.to_string(),
            },
        })?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| PlmmError::MalformedFile {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?
        .iter()
        .map(|h| h.to_string())
        .collect();
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| PlmmError::MalformedFile {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if record.len() != headers.len() {
            return Err(PlmmError::MalformedFile {
                path: path.to_path_buf(),
                message: format!(
                    "row {} has {} fields, header has {}",
                    i + 1,
                    record.len(),
                    headers.len()
                ),
            });
        }
        let mut row = Vec::with_capacity(headers.len());
        for (j, field) in record.iter().enumerate() {
            let parsed: Option<f64> = field.parse().ok().filter(|v: &f64| v.is_finite());
            match parsed {
                Some(v) => row.push(v),
                None => {
                    return Err(PlmmError::NonNumericCell {
                        path: path.to_path_buf(),
                        row: i + 1,
                        column: headers[j].clone(),
                        value: field.to_string(),
                    })
                }
            }
        }
        rows.push(row);
    }
    Ok((headers, rows))
}

/// Read a delimited file with a header row, extracting `outcome_column` as y
/// and keeping every other column (in file order) as a feature.
pub fn load_dataset(path: &Path, outcome_column: &str, delimiter: u8) -> Result<Dataset> {
    let (headers, rows) = parse_table(path, delimiter)?;
    let outcome_idx = headers
        .iter()
        .position(|h| h == outcome_column)
        .ok_or_else(|| PlmmError::MissingOutcome(outcome_column.to_string()))?;
    let n = rows.len();
    if n < 2 {
        return Err(PlmmError::TooFewRows(n));
    }
    let p = headers.len() - 1;
    if p == 0 {
        return Err(PlmmError::NoFeatures);
    }
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter_map(|(j, h)| (j != outcome_idx).then(|| h.clone()))
        .collect();
    let mut x = Array2::zeros((n, p));
    let mut y = Array1::zeros(n);
    for (i, row) in rows.iter().enumerate() {
        let mut jj = 0;
        for (j, v) in row.iter().enumerate() {
            if j == outcome_idx {
                y[i] = *v;
            } else {
                x[[i, jj]] = *v;
                jj += 1;
            }
        }
    }
    let row_ids = (1..=n).map(|i| i.to_string()).collect();
    Dataset::new(x, y, feature_names, row_ids, outcome_column.to_string())
}

/// Read a delimited file of features only (used for prediction inputs).
/// Returns (header names, matrix, row ids).
pub fn load_feature_matrix(
    path: &Path,
    delimiter: u8,
) -> Result<(Vec<String>, Array2<f64>, Vec<String>)> {
    let (headers, rows) = parse_table(path, delimiter)?;
    let n = rows.len();
    let p = headers.len();
    if n == 0 {
        return Err(PlmmError::TooFewRows(0));
    }
    if p == 0 {
        return Err(PlmmError::NoFeatures);
    }
    let mut x = Array2::zeros((n, p));
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            x[[i, j]] = *v;
        }
    }
    let row_ids = (1..=n).map(|i| i.to_string()).collect();
    Ok((headers, x, row_ids))
}

/// Write a dataset back out as a delimited file. Floats are written with
/// shortest round-trip formatting, so a save/load cycle is bit-exact.
pub fn save_dataset(path: &Path, dataset: &Dataset, delimiter: u8) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .delimiter(delimiter)
        .from_path(path)
        .map_err(|e| PlmmError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::other(e.to_string()),
        })?;
    let mut header: Vec<&str> = dataset.feature_names.iter().map(|s| s.as_str()).collect();
    header.push(&dataset.outcome_name);
    let io_err = |e: csv::Error| PlmmError::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    };
    writer.write_record(&header).map_err(io_err)?;
    for i in 0..dataset.n() {
        let mut record: Vec<String> = dataset.x.row(i).iter().map(|v| v.to_string()).collect();
        record.push(dataset.y[i].to_string());
        writer.write_record(&record).map_err(io_err)?;
    }
    writer.flush().map_err(|e| PlmmError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(())
}
