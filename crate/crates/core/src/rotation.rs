//! Whitening rotation of the standardized data, followed by re-standardization
//! of the rotated design.
//!
//! Rotation changes column-wise variation, so the rotated design is centered
//! and rescaled again before fitting; columns that collapse to near-zero
//! variance at this stage are screened out exactly like raw-stage constants.
//! The rotated outcome is left alone so that held-out errors stay comparable.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::data::StandardizedMatrix;
use crate::decomposition::Preconditioner;
use crate::error::{PlmmError, Result};

#[derive(Debug, Clone)]
pub struct RotatedData {
    /// Re-standardized rotated design.
    pub xrot: Array2<f64>,
    /// Rotated centered outcome (not re-standardized).
    pub yrot: Array1<f64>,
    /// Centers of the rotated columns before re-standardization.
    pub rot_centers: Array1<f64>,
    /// Divide-by-n standard deviations of the rotated columns.
    pub rot_scales: Array1<f64>,
    /// Active mask after both screening stages; implies raw-stage active.
    pub active: Vec<bool>,
    pub eta: f64,
}

impl RotatedData {
    pub fn n(&self) -> usize {
        self.xrot.nrows()
    }

    pub fn p(&self) -> usize {
        self.xrot.ncols()
    }
}

fn check_dims(n_pre: usize, xstd: &StandardizedMatrix, y: ArrayView1<'_, f64>) -> Result<()> {
    if xstd.n() != n_pre {
        return Err(PlmmError::DimensionMismatch {
            what: "rotation rows",
            expected: n_pre,
            got: xstd.n(),
        });
    }
    if y.len() != n_pre {
        return Err(PlmmError::DimensionMismatch {
            what: "rotation outcome length",
            expected: n_pre,
            got: y.len(),
        });
    }
    Ok(())
}

/// Rotate without re-standardizing. At eta = 0 the whitening map is the
/// identity and the inputs pass through unchanged.
pub fn rotate_raw(
    pre: &Preconditioner,
    xstd: &StandardizedMatrix,
    y_centered: ArrayView1<'_, f64>,
) -> Result<(Array2<f64>, Array1<f64>)> {
    check_dims(pre.n(), xstd, y_centered)?;
    if pre.eta == 0.0 {
        return Ok((xstd.values.clone(), y_centered.to_owned()));
    }
    Ok((
        pre.apply_matrix(xstd.values.view()),
        pre.apply_vector(y_centered),
    ))
}

/// Rotate and re-standardize, updating the active mask.
pub fn rotate(
    pre: &Preconditioner,
    xstd: &StandardizedMatrix,
    y_centered: ArrayView1<'_, f64>,
    variance_threshold: f64,
) -> Result<RotatedData> {
    let (xrot_raw, yrot) = rotate_raw(pre, xstd, y_centered)?;
    Ok(restandardize_rotated(
        xrot_raw,
        yrot,
        &xstd.active,
        variance_threshold,
        pre.eta,
    ))
}

/// Rotate with an arbitrary (row-subset) whitening matrix. Used by the inner
/// CV shortcut, where the preconditioner comes from the full-data spectrum.
pub fn rotate_with_matrix(
    m: ArrayView2<'_, f64>,
    xstd: &StandardizedMatrix,
    y_centered: ArrayView1<'_, f64>,
    variance_threshold: f64,
    eta: f64,
) -> Result<RotatedData> {
    check_dims(m.ncols(), xstd, y_centered)?;
    let xrot_raw = m.dot(&xstd.values);
    let yrot = m.dot(&y_centered);
    Ok(restandardize_rotated(
        xrot_raw,
        yrot,
        &xstd.active,
        variance_threshold,
        eta,
    ))
}

fn restandardize_rotated(
    mut xrot: Array2<f64>,
    yrot: Array1<f64>,
    raw_active: &[bool],
    variance_threshold: f64,
    eta: f64,
) -> RotatedData {
    let (n, p) = xrot.dim();
    let nf = n as f64;
    let mut rot_centers = Array1::zeros(p);
    let mut rot_scales = Array1::zeros(p);
    let mut active = vec![false; p];
    for j in 0..p {
        if !raw_active[j] {
            // stays excluded; the rotated column is identically zero anyway
            xrot.column_mut(j).fill(0.0);
            continue;
        }
        let col = xrot.column(j);
        let mean = col.sum() / nf;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / nf;
        let sd = var.sqrt();
        rot_centers[j] = mean;
        rot_scales[j] = sd;
        if var > variance_threshold {
            active[j] = true;
            let mut col = xrot.column_mut(j);
            for v in col.iter_mut() {
                *v = (*v - mean) / sd;
            }
        } else {
            xrot.column_mut(j).fill(0.0);
        }
    }
    RotatedData {
        xrot,
        yrot,
        rot_centers,
        rot_scales,
        active,
        eta,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{standardize, DEFAULT_VARIANCE_THRESHOLD};
    use crate::decomposition::{build_preconditioner, compute_kinship, eigendecompose};
    use crate::random;

    fn pipeline(seed: u64, n: usize, p: usize, eta: f64) -> (StandardizedMatrix, Preconditioner) {
        let mut rng = random::seeded(seed);
        let x = random::standard_normal_matrix(&mut rng, n, p);
        let std = standardize(x.view(), DEFAULT_VARIANCE_THRESHOLD).unwrap();
        let spec = eigendecompose(&compute_kinship(&std).unwrap()).unwrap();
        let pre = build_preconditioner(&spec, eta).unwrap();
        (std, pre)
    }

    fn centered_outcome(seed: u64, n: usize) -> Array1<f64> {
        let mut rng = random::seeded(seed);
        let mut y = random::standard_normal_vector(&mut rng, n);
        let mean = y.sum() / n as f64;
        y -= mean;
        y
    }

    #[test]
    fn eta_zero_rotation_is_an_isometry() {
        let (std, pre) = pipeline(2, 15, 6, 0.0);
        let y = centered_outcome(3, 15);
        let (_, yrot) = rotate_raw(&pre, &std, y.view()).unwrap();
        let n0: f64 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        let n1: f64 = yrot.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((n0 - n1).abs() < 1e-10);
    }

    #[test]
    fn rotated_columns_are_standardized() {
        let (std, pre) = pipeline(4, 20, 10, 0.8);
        let y = centered_outcome(5, 20);
        let rot = rotate(&pre, &std, y.view(), DEFAULT_VARIANCE_THRESHOLD).unwrap();
        let nf = 20.0;
        for j in 0..10 {
            assert!(rot.active[j]);
            let col = rot.xrot.column(j);
            let mean = col.sum() / nf;
            let msq = col.iter().map(|v| v * v).sum::<f64>() / nf;
            assert!(mean.abs() < 1e-10);
            assert!((msq - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn raw_constant_feature_never_enters_the_fit() {
        let mut rng = random::seeded(6);
        let mut x = random::standard_normal_matrix(&mut rng, 12, 4);
        for v in x.column_mut(2).iter_mut() {
            *v = 1.25;
        }
        let std = standardize(x.view(), DEFAULT_VARIANCE_THRESHOLD).unwrap();
        let spec = eigendecompose(&compute_kinship(&std).unwrap()).unwrap();
        let pre = build_preconditioner(&spec, 0.5).unwrap();
        let y = centered_outcome(7, 12);
        let rot = rotate(&pre, &std, y.view(), DEFAULT_VARIANCE_THRESHOLD).unwrap();
        assert!(!rot.active[2]);
        assert!(rot.xrot.column(2).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn active_implies_raw_active() {
        let (std, pre) = pipeline(8, 18, 7, 0.3);
        let y = centered_outcome(9, 18);
        let rot = rotate(&pre, &std, y.view(), DEFAULT_VARIANCE_THRESHOLD).unwrap();
        for j in 0..7 {
            assert!(!rot.active[j] || std.active[j]);
        }
    }

    #[test]
    fn whitening_identity_across_eta_values() {
        for eta in [0.0, 0.3, 0.9] {
            let (std, pre) = pipeline(10, 30, 45, eta);
            let kin = compute_kinship(&std).unwrap();
            let m = pre.matrix();
            let n = 30;
            let mut sigma = kin.k.clone() * eta;
            for i in 0..n {
                sigma[[i, i]] += 1.0 - eta;
            }
            let product = m.dot(&sigma).dot(&m.t());
            for i in 0..n {
                for j in 0..n {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!(
                        (product[[i, j]] - expect).abs() < 1e-8,
                        "eta={eta} i={i} j={j}"
                    );
                }
            }
        }
    }
}
