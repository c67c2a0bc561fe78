//! Best linear unbiased prediction for new observations.
//!
//! The covariance correction adds S21 * S11^{-1} * (training residuals) to
//! the linear predictor, with both blocks built from the training-stage
//! standardization so the scales agree with the fitted coefficients. Test
//! rows that are bit-for-bit copies of training rows carry the unstructured
//! (1 - eta) variance share as well, which makes prediction on the training
//! data itself reproduce the observed outcomes exactly.
//!
//! The deliberately wrong variant subsets a whole-dataset covariance instead,
//! mixing standardization scales; it exists to demonstrate the resulting
//! estimation damage and is exposed only through benchmark scenarios.

use std::collections::HashMap;
use std::hash::{DefaultHasher, Hash, Hasher};

use nalgebra::{Cholesky, DMatrix};
use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::data::{apply_standardization, StandardizedMatrix};
use crate::error::{PlmmError, Result};
use crate::lasso::{predict_linear, PlmmModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlupMode {
    Correct,
    Incorrect,
}

/// Whole-dataset standardization plus the row split, needed only to
/// reproduce the incorrect-scaling shortcut.
#[derive(Debug, Clone)]
pub struct FullDataContext {
    pub xstd_full: StandardizedMatrix,
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct BlupComponents {
    pub s11: Array2<f64>,
    pub s21: Array2<f64>,
    pub mode: BlupMode,
}

fn row_key(row: &[f64]) -> u64 {
    let mut h = DefaultHasher::new();
    for v in row {
        v.to_bits().hash(&mut h);
    }
    h.finish()
}

/// Build the covariance blocks for a prediction request.
pub fn blup_components(
    model: &PlmmModel,
    x2_raw: ArrayView2<'_, f64>,
    mode: BlupMode,
    full_data_ctx: Option<&FullDataContext>,
) -> Result<BlupComponents> {
    if x2_raw.ncols() != model.p() {
        return Err(PlmmError::DimensionMismatch {
            what: "prediction columns",
            expected: model.p(),
            got: x2_raw.ncols(),
        });
    }
    let eta = model.eta;
    match mode {
        BlupMode::Correct => {
            let active_idx: Vec<usize> = model
                .active_raw
                .iter()
                .enumerate()
                .filter_map(|(j, a)| a.then_some(j))
                .collect();
            let pf = model.n_active_raw as f64;
            let x2_std = apply_standardization(
                x2_raw,
                model.train_centers.view(),
                model.train_scales.view(),
                &model.active_raw,
            )?;
            let x1a = model.train_x_std.select(Axis(1), &active_idx);
            let x2a = x2_std.select(Axis(1), &active_idx);
            let mut s11 = x1a.dot(&x1a.t());
            s11 *= eta / pf;
            let n1 = s11.nrows();
            for i in 0..n1 {
                s11[[i, i]] += 1.0 - eta;
            }
            let mut s21 = x2a.dot(&x1a.t());
            s21 *= eta / pf;
            // rows identical to a training row share its unstructured variance
            let mut train_lookup: HashMap<u64, Vec<usize>> = HashMap::new();
            for (t, row) in x1a.rows().into_iter().enumerate() {
                train_lookup
                    .entry(row_key(row.as_slice().expect("contiguous row")))
                    .or_default()
                    .push(t);
            }
            for (i, row) in x2a.rows().into_iter().enumerate() {
                let key = row_key(row.as_slice().expect("contiguous row"));
                if let Some(candidates) = train_lookup.get(&key) {
                    for &t in candidates {
                        if row == x1a.row(t) {
                            s21[[i, t]] += 1.0 - eta;
                        }
                    }
                }
            }
            Ok(BlupComponents { s11, s21, mode })
        }
        BlupMode::Incorrect => {
            let ctx = full_data_ctx.ok_or_else(|| {
                PlmmError::InvalidArgument(
                    "incorrect BLUP mode requires the full-data context".into(),
                )
            })?;
            if x2_raw.nrows() != ctx.test_rows.len() {
                return Err(PlmmError::DimensionMismatch {
                    what: "test rows vs context",
                    expected: ctx.test_rows.len(),
                    got: x2_raw.nrows(),
                });
            }
            let active_idx = ctx.xstd_full.active_indices();
            let pf = active_idx.len() as f64;
            if pf == 0.0 {
                return Err(PlmmError::NoActiveFeatures);
            }
            let xf = ctx.xstd_full.values.select(Axis(1), &active_idx);
            let x1f = xf.select(Axis(0), &ctx.train_rows);
            let x2f = xf.select(Axis(0), &ctx.test_rows);
            let mut s11 = x1f.dot(&x1f.t());
            s11 *= eta / pf;
            let n1 = s11.nrows();
            for i in 0..n1 {
                s11[[i, i]] += 1.0 - eta;
            }
            let mut s21 = x2f.dot(&x1f.t());
            s21 *= eta / pf;
            Ok(BlupComponents { s11, s21, mode })
        }
    }
}

fn solve_correction(
    components: &BlupComponents,
    residuals: ArrayView2<'_, f64>,
) -> Result<Array2<f64>> {
    let n1 = components.s11.nrows();
    if residuals.nrows() != n1 {
        return Err(PlmmError::DimensionMismatch {
            what: "residual rows",
            expected: n1,
            got: residuals.nrows(),
        });
    }
    let l = residuals.ncols();
    let s11 = DMatrix::from_fn(n1, n1, |i, j| components.s11[[i, j]]);
    // the (1 - eta) ridge keeps this positive definite for eta < 1
    let chol = Cholesky::new(s11).expect("S11 is positive definite for eta < 1");
    let rhs = DMatrix::from_fn(n1, l, |i, j| residuals[[i, j]]);
    let solved = chol.solve(&rhs);
    let solved_nd = Array2::from_shape_fn((n1, l), |(i, j)| solved[(i, j)]);
    Ok(components.s21.dot(&solved_nd))
}

/// BLUP predictions at every path position: m x L.
pub fn predict_blup_path(
    model: &PlmmModel,
    x2_raw: ArrayView2<'_, f64>,
    mode: BlupMode,
    full_data_ctx: Option<&FullDataContext>,
) -> Result<Array2<f64>> {
    let components = blup_components(model, x2_raw, mode, full_data_ctx)?;
    let correction = solve_correction(&components, model.residuals_path.view())?;
    let m = x2_raw.nrows();
    let n_lambda = model.n_lambda();
    let mut out = Array2::zeros((m, n_lambda));
    for l in 0..n_lambda {
        let linear = predict_linear(model, x2_raw, l)?;
        for i in 0..m {
            out[[i, l]] = linear[i] + correction[[i, l]];
        }
    }
    Ok(out)
}

/// BLUP predictions at one path position.
pub fn predict_blup(
    model: &PlmmModel,
    x2_raw: ArrayView2<'_, f64>,
    lambda_index: usize,
    mode: BlupMode,
    full_data_ctx: Option<&FullDataContext>,
) -> Result<Array1<f64>> {
    model.check_lambda_index(lambda_index)?;
    let linear = predict_linear(model, x2_raw, lambda_index)?;
    let components = blup_components(model, x2_raw, mode, full_data_ctx)?;
    let residuals = model
        .residuals_path
        .column(lambda_index)
        .insert_axis(Axis(1))
        .to_owned();
    let correction = solve_correction(&components, residuals.view())?;
    Ok(&linear + &correction.column(0))
}
