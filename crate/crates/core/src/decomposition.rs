//! Realized relationship matrix, its eigendecomposition, and the whitening
//! preconditioner built from it.
//!
//! The kinship matrix is always decomposed as a full n x n symmetric
//! eigenproblem, never as a thin SVD of the design: the identity component of
//! the covariance is n x n, and a truncated factor basis cannot represent it.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::data::StandardizedMatrix;
use crate::error::{PlmmError, Result};

/// Upper bound for the structure fraction eta. Weights for zero eigenvalues
/// are (1 - eta)^(-1/2), so eta must stay strictly below 1.
pub const ETA_MAX: f64 = 0.99;

/// Eigenvalues in (-NEGATIVE_EIGENVALUE_CLAMP, 0) are treated as roundoff and
/// set to zero; anything more negative indicates a broken kinship matrix.
const NEGATIVE_EIGENVALUE_CLAMP: f64 = 1e-8;

/// Realized relationship matrix K = (1/p) X Xᵀ over the active standardized
/// columns.
#[derive(Debug, Clone)]
pub struct Kinship {
    pub k: Array2<f64>,
    /// Number of active columns that entered the 1/p factor.
    pub n_active: usize,
}

/// Full eigendecomposition of a kinship matrix, eigenvalues sorted descending.
#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Eigenvectors as columns.
    pub u: Array2<f64>,
    /// Eigenvalues, descending, clamped to be nonnegative.
    pub s: Array1<f64>,
}

impl Spectrum {
    pub fn n(&self) -> usize {
        self.s.len()
    }
}

/// Rotation weights for the whitening map M = U diag(w) Uᵀ, where
/// w_i = (eta * s_i + 1 - eta)^(-1/2).
#[derive(Debug, Clone)]
pub struct Preconditioner {
    pub u: Array2<f64>,
    pub w: Array1<f64>,
    pub eta: f64,
}

pub fn compute_kinship(xstd: &StandardizedMatrix) -> Result<Kinship> {
    let n_active = xstd.n_active();
    if n_active == 0 {
        return Err(PlmmError::NoActiveFeatures);
    }
    let xa = xstd.active_values();
    let mut k = xa.dot(&xa.t());
    k /= n_active as f64;
    // enforce exact symmetry against accumulation-order roundoff
    let n = k.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (k[[i, j]] + k[[j, i]]);
            k[[i, j]] = avg;
            k[[j, i]] = avg;
        }
    }
    Ok(Kinship { k, n_active })
}

pub fn eigendecompose(kinship: &Kinship) -> Result<Spectrum> {
    let n = kinship.k.nrows();
    let mat = DMatrix::from_fn(n, n, |i, j| kinship.k[[i, j]]);
    let eigen = nalgebra::SymmetricEigen::try_new(mat, f64::EPSILON, 10_000)
        .ok_or_else(|| PlmmError::EigenFailure("symmetric QR iteration did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[b].total_cmp(&eigen.eigenvalues[a]));
    let mut u = Array2::zeros((n, n));
    let mut s = Array1::zeros(n);
    for (dst, &src) in order.iter().enumerate() {
        let val = eigen.eigenvalues[src];
        if val < -NEGATIVE_EIGENVALUE_CLAMP {
            return Err(PlmmError::NegativeEigenvalue(val));
        }
        s[dst] = val.max(0.0);
        for i in 0..n {
            u[[i, dst]] = eigen.eigenvectors[(i, src)];
        }
    }
    Ok(Spectrum { u, s })
}

pub fn build_preconditioner(spectrum: &Spectrum, eta: f64) -> Result<Preconditioner> {
    if !(0.0..=ETA_MAX).contains(&eta) {
        return Err(PlmmError::InvalidArgument(format!(
            "eta must lie in [0, {ETA_MAX}], got {eta}"
        )));
    }
    let w = spectrum.s.mapv(|s| 1.0 / (eta * s + (1.0 - eta)).sqrt());
    debug_assert!(w.iter().all(|v| v.is_finite() && *v > 0.0));
    Ok(Preconditioner {
        u: spectrum.u.clone(),
        w,
        eta,
    })
}

impl Preconditioner {
    pub fn n(&self) -> usize {
        self.w.len()
    }

    /// Apply the symmetric whitening map M = U diag(w) Uᵀ to a vector.
    pub fn apply_vector(&self, v: ArrayView1<'_, f64>) -> Array1<f64> {
        let mut t = self.u.t().dot(&v);
        t *= &self.w;
        self.u.dot(&t)
    }

    /// Apply M to every column of an n x p matrix.
    pub fn apply_matrix(&self, m: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut t = self.u.t().dot(&m);
        for (mut row, &wi) in t.rows_mut().into_iter().zip(self.w.iter()) {
            row *= wi;
        }
        self.u.dot(&t)
    }

    /// Materialize M as a dense matrix.
    pub fn matrix(&self) -> Array2<f64> {
        let mut uw = self.u.clone();
        for (mut col, &wi) in uw.columns_mut().into_iter().zip(self.w.iter()) {
            col *= wi;
        }
        uw.dot(&self.u.t())
    }

    /// The naive row-subset preconditioner used by inner CV: keep the
    /// full-data weights and eigenvectors, restricted to the given rows.
    pub fn subset_matrix(&self, rows: &[usize]) -> Array2<f64> {
        let u_rows = self.u.select(Axis(0), rows);
        let mut uw = u_rows.clone();
        for (mut col, &wi) in uw.columns_mut().into_iter().zip(self.w.iter()) {
            col *= wi;
        }
        uw.dot(&u_rows.t())
    }
}
