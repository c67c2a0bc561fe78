//! File formats: model container, spectrum cache, standardization metadata,
//! and content hashing for reproducibility checks.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::StandardizedMatrix;
use crate::decomposition::Spectrum;
use crate::error::{PlmmError, Result};
use crate::lasso::PlmmModel;

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn hash_floats(hasher: &mut Sha256, values: impl Iterator<Item = f64>) {
    for v in values {
        hasher.update(v.to_le_bytes());
    }
}

/// Content hash of a design/outcome pair.
pub fn hash_xy(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>) -> String {
    let mut hasher = Sha256::new();
    hasher.update((x.nrows() as u64).to_le_bytes());
    hasher.update((x.ncols() as u64).to_le_bytes());
    hash_floats(&mut hasher, x.iter().copied());
    hash_floats(&mut hasher, y.iter().copied());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Content hash of a standardized design (used to key the spectrum cache).
pub fn hash_matrix(x: ArrayView2<'_, f64>) -> String {
    let mut hasher = Sha256::new();
    hasher.update((x.nrows() as u64).to_le_bytes());
    hasher.update((x.ncols() as u64).to_le_bytes());
    hash_floats(&mut hasher, x.iter().copied());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| PlmmError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(sha256_hex(&bytes))
}

fn matrix_to_rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn rows_to_matrix(rows: Vec<Vec<f64>>, what: &'static str) -> Result<Array2<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map(|r| r.len()).unwrap_or(0);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(PlmmError::InvalidArgument(format!("ragged rows in {what}")));
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Array2::from_shape_vec((nrows, ncols), flat).map_err(|_| PlmmError::DimensionMismatch {
        what,
        expected: nrows * ncols,
        got: 0,
    })
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    beta0: f64,
    eta: f64,
    n_active_raw: usize,
    lambdas: Vec<f64>,
    feature_names: Vec<String>,
    outcome_name: String,
    data_hash: String,
    train_centers: Vec<f64>,
    train_scales: Vec<f64>,
    active_raw: Vec<bool>,
    rot_centers: Vec<f64>,
    rot_scales: Vec<f64>,
    active: Vec<bool>,
    /// One row per feature, one column per lambda, original scale.
    beta_path: Vec<Vec<f64>>,
    /// One row per feature, rotated-standardized scale.
    beta_std_path: Vec<Vec<f64>>,
    /// One row per training observation, raw-scale residuals.
    residuals_path: Vec<Vec<f64>>,
    /// Raw-stage standardized training design, one row per observation.
    train_x_std: Vec<Vec<f64>>,
}

pub fn save_model(path: &Path, model: &PlmmModel) -> Result<()> {
    let file = ModelFile {
        format: "plmm-model".into(),
        version: 1,
        beta0: model.beta0,
        eta: model.eta,
        n_active_raw: model.n_active_raw,
        lambdas: model.lambdas.clone(),
        feature_names: model.feature_names.clone(),
        outcome_name: model.outcome_name.clone(),
        data_hash: model.data_hash.clone(),
        train_centers: model.train_centers.to_vec(),
        train_scales: model.train_scales.to_vec(),
        active_raw: model.active_raw.clone(),
        rot_centers: model.rot_centers.to_vec(),
        rot_scales: model.rot_scales.to_vec(),
        active: model.active.clone(),
        beta_path: matrix_to_rows(&model.beta_path),
        beta_std_path: matrix_to_rows(&model.beta_std_path),
        residuals_path: matrix_to_rows(&model.residuals_path),
        train_x_std: matrix_to_rows(&model.train_x_std),
    };
    let text = serde_json::to_string(&file).expect("model serializes");
    std::fs::write(path, text).map_err(|e| PlmmError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

pub fn load_model(path: &Path) -> Result<PlmmModel> {
    let text = std::fs::read_to_string(path).map_err(|e| PlmmError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let file: ModelFile = serde_json::from_str(&text).map_err(|e| PlmmError::MalformedFile {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    if file.format != "plmm-model" {
        return Err(PlmmError::MalformedFile {
            path: path.to_path_buf(),
            message: format!("unexpected format tag '{}'", file.format),
        });
    }
    let model = PlmmModel {
        beta0: file.beta0,
        eta: file.eta,
        lambdas: file.lambdas,
        beta_path: rows_to_matrix(file.beta_path, "beta_path")?,
        beta_std_path: rows_to_matrix(file.beta_std_path, "beta_std_path")?,
        train_centers: Array1::from_vec(file.train_centers),
        train_scales: Array1::from_vec(file.train_scales),
        active_raw: file.active_raw,
        rot_centers: Array1::from_vec(file.rot_centers),
        rot_scales: Array1::from_vec(file.rot_scales),
        active: file.active,
        residuals_path: rows_to_matrix(file.residuals_path, "residuals_path")?,
        train_x_std: rows_to_matrix(file.train_x_std, "train_x_std")?,
        n_active_raw: file.n_active_raw,
        feature_names: file.feature_names,
        outcome_name: file.outcome_name,
        data_hash: file.data_hash,
    };
    let p = model.beta_path.nrows();
    if model.feature_names.len() != p
        || model.train_centers.len() != p
        || model.active.len() != p
    {
        return Err(PlmmError::MalformedFile {
            path: path.to_path_buf(),
            message: "inconsistent feature dimensions".into(),
        });
    }
    Ok(model)
}

#[derive(Serialize, Deserialize)]
struct SpectrumFile {
    format: String,
    version: u32,
    /// Hash of the standardized design this spectrum was computed from.
    data_hash: String,
    eigenvalues: Vec<f64>,
    /// Eigenvector matrix, one row per observation.
    eigenvectors: Vec<Vec<f64>>,
}

pub fn save_spectrum(path: &Path, spectrum: &Spectrum, data_hash: &str) -> Result<()> {
    let file = SpectrumFile {
        format: "plmm-spectrum".into(),
        version: 1,
        data_hash: data_hash.to_string(),
        eigenvalues: spectrum.s.to_vec(),
        eigenvectors: matrix_to_rows(&spectrum.u),
    };
    let text = serde_json::to_string(&file).expect("spectrum serializes");
    std::fs::write(path, text).map_err(|e| PlmmError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Reload a cached spectrum; a hash mismatch against the standardized design
/// it is supposed to describe is an error.
pub fn load_spectrum(path: &Path, expected_hash: &str) -> Result<Spectrum> {
    let text = std::fs::read_to_string(path).map_err(|e| PlmmError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let file: SpectrumFile = serde_json::from_str(&text).map_err(|e| PlmmError::MalformedFile {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    if file.format != "plmm-spectrum" {
        return Err(PlmmError::MalformedFile {
            path: path.to_path_buf(),
            message: format!("unexpected format tag '{}'", file.format),
        });
    }
    if file.data_hash != expected_hash {
        return Err(PlmmError::HashMismatch {
            expected: expected_hash.to_string(),
            found: file.data_hash,
        });
    }
    Ok(Spectrum {
        u: rows_to_matrix(file.eigenvectors, "eigenvectors")?,
        s: Array1::from_vec(file.eigenvalues),
    })
}

#[derive(Serialize, Deserialize)]
struct StandardizationFile {
    centers: Vec<f64>,
    scales: Vec<f64>,
    active: Vec<bool>,
}

pub fn save_standardization(path: &Path, std: &StandardizedMatrix) -> Result<()> {
    let file = StandardizationFile {
        centers: std.centers.to_vec(),
        scales: std.scales.to_vec(),
        active: std.active.clone(),
    };
    let text = serde_json::to_string(&file).expect("standardization serializes");
    std::fs::write(path, text).map_err(|e| PlmmError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

pub fn load_standardization(path: &Path) -> Result<(Array1<f64>, Array1<f64>, Vec<bool>)> {
    let text = std::fs::read_to_string(path).map_err(|e| PlmmError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let file: StandardizationFile =
        serde_json::from_str(&text).map_err(|e| PlmmError::MalformedFile {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
    Ok((
        Array1::from_vec(file.centers),
        Array1::from_vec(file.scales),
        file.active,
    ))
}
