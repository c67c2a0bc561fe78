//! Coordinate-descent lasso over a penalty path on rotated, re-standardized
//! data, with the closed-form intercept and back-transformation of the
//! coefficients to the original feature scale.
//!
//! Because the raw design is column-centered and the whitening map sends the
//! ones vector to a multiple of itself, the intercept separates from the
//! penalized problem: the model is fit with no intercept column and
//! beta0 = mean(y) is attached afterwards.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::data::StandardizedMatrix;
use crate::error::{PlmmError, Result};
use crate::rotation::RotatedData;

/// Descending grid of penalty values.
#[derive(Debug, Clone)]
pub struct LambdaPath {
    pub lambdas: Vec<f64>,
    pub min_ratio: f64,
}

impl LambdaPath {
    pub fn n_lambda(&self) -> usize {
        self.lambdas.len()
    }

    /// Wrap an explicit strictly descending grid.
    pub fn from_lambdas(lambdas: Vec<f64>) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(PlmmError::InvalidArgument("empty lambda grid".into()));
        }
        for w in lambdas.windows(2) {
            if !(w[1] < w[0]) {
                return Err(PlmmError::InvalidArgument(
                    "lambda grid must be strictly descending".into(),
                ));
            }
        }
        if lambdas.iter().any(|l| !l.is_finite() || *l < 0.0) {
            return Err(PlmmError::InvalidArgument(
                "lambda values must be finite and nonnegative".into(),
            ));
        }
        let min_ratio = lambdas.last().unwrap() / lambdas[0];
        Ok(LambdaPath { lambdas, min_ratio })
    }
}

/// Default smallest-to-largest penalty ratio: looser when p >= n.
pub fn default_min_ratio(n: usize, p: usize) -> f64 {
    if n > p {
        0.001
    } else {
        0.05
    }
}

/// Geometric grid from lambda_max (smallest penalty with an all-zero
/// solution) down to lambda_max * min_ratio.
pub fn make_lambda_path(rot: &RotatedData, n_lambda: usize, min_ratio: f64) -> Result<LambdaPath> {
    if rot.active.iter().all(|a| !a) {
        return Err(PlmmError::NoActiveFeatures);
    }
    if n_lambda == 0 {
        return Err(PlmmError::InvalidArgument("n_lambda must be >= 1".into()));
    }
    if !(min_ratio > 0.0 && min_ratio < 1.0) {
        return Err(PlmmError::InvalidArgument(format!(
            "min_ratio must lie in (0, 1), got {min_ratio}"
        )));
    }
    let n = rot.n() as f64;
    let mut lambda_max = 0.0_f64;
    for (j, active) in rot.active.iter().enumerate() {
        if *active {
            let c = rot.xrot.column(j).dot(&rot.yrot).abs() / n;
            lambda_max = lambda_max.max(c);
        }
    }
    if !(lambda_max > 0.0) || !lambda_max.is_finite() {
        return Err(PlmmError::DegeneratePath);
    }
    if n_lambda == 1 {
        return Ok(LambdaPath {
            lambdas: vec![lambda_max],
            min_ratio,
        });
    }
    let log_ratio = min_ratio.ln();
    let lambdas: Vec<f64> = (0..n_lambda)
        .map(|i| lambda_max * (log_ratio * i as f64 / (n_lambda - 1) as f64).exp())
        .collect();
    Ok(LambdaPath { lambdas, min_ratio })
}

#[derive(Debug, Clone, Copy)]
pub struct CdSettings {
    /// Convergence: max absolute coefficient change per sweep.
    pub tol: f64,
    /// Sweep budget per lambda before reporting non-convergence.
    pub max_sweeps: usize,
}

impl Default for CdSettings {
    fn default() -> Self {
        CdSettings {
            tol: 1e-7,
            max_sweeps: 100_000,
        }
    }
}

#[inline]
pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

fn cd_sweep(
    cols: &[usize],
    x_cols: &[Array1<f64>],
    xtx_n: &[f64],
    r: &mut Array1<f64>,
    beta: &mut [f64],
    lambda: f64,
    nf: f64,
) -> f64 {
    let mut max_change = 0.0_f64;
    for &j in cols {
        let col = &x_cols[j];
        let old = beta[j];
        let z = col.dot(r) / nf + xtx_n[j] * old;
        let new = soft_threshold(z, lambda) / xtx_n[j];
        if new != old {
            r.scaled_add(old - new, col);
            beta[j] = new;
            max_change = max_change.max((new - old).abs());
        }
    }
    max_change
}

/// Cyclic coordinate descent with warm starts along a descending path.
/// Inactive columns are excluded from updates outright (an exact infinite
/// penalty). Returns coefficients on the input (standardized) scale, p x L.
pub(crate) fn cd_solve_path(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    active: &[bool],
    lambdas: &[f64],
    settings: &CdSettings,
) -> Result<Array2<f64>> {
    let (n, p) = x.dim();
    let nf = n as f64;
    let x_cols: Vec<Array1<f64>> = (0..p).map(|j| x.column(j).to_owned()).collect();
    let xtx_n: Vec<f64> = x_cols.iter().map(|c| c.dot(c) / nf).collect();
    let update_cols: Vec<usize> = (0..p)
        .filter(|&j| active[j] && xtx_n[j] > 0.0)
        .collect();
    let mut beta = vec![0.0_f64; p];
    let mut r = y.to_owned();
    let mut out = Array2::zeros((p, lambdas.len()));
    for (l, &lambda) in lambdas.iter().enumerate() {
        let mut sweeps = 0_usize;
        loop {
            let change = cd_sweep(&update_cols, &x_cols, &xtx_n, &mut r, &mut beta, lambda, nf);
            sweeps += 1;
            if change < settings.tol {
                break;
            }
            if sweeps >= settings.max_sweeps {
                return Err(PlmmError::NonConvergence {
                    lambda,
                    max_sweeps: settings.max_sweeps,
                });
            }
            // iterate the current support until stable, then re-check all
            let support: Vec<usize> = update_cols
                .iter()
                .copied()
                .filter(|&j| beta[j] != 0.0)
                .collect();
            if support.is_empty() {
                continue;
            }
            loop {
                let change =
                    cd_sweep(&support, &x_cols, &xtx_n, &mut r, &mut beta, lambda, nf);
                sweeps += 1;
                if change < settings.tol {
                    break;
                }
                if sweeps >= settings.max_sweeps {
                    return Err(PlmmError::NonConvergence {
                        lambda,
                        max_sweeps: settings.max_sweeps,
                    });
                }
            }
        }
        for j in 0..p {
            out[[j, l]] = beta[j];
        }
    }
    Ok(out)
}

/// Penalized objective (1/2n) ||y - X b||^2 + lambda * ||b||_1.
pub fn penalized_objective(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    beta: &[f64],
    lambda: f64,
) -> f64 {
    let n = y.len() as f64;
    let fitted = x.dot(&Array1::from_vec(beta.to_vec()));
    let rss: f64 = y
        .iter()
        .zip(fitted.iter())
        .map(|(yi, fi)| (yi - fi) * (yi - fi))
        .sum();
    rss / (2.0 * n) + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
}

/// Worst stationarity violation over the active columns: for zero
/// coefficients the correlation must stay within lambda, for nonzero ones it
/// must sit on the penalty boundary with the matching sign.
pub fn kkt_violation(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    active: &[bool],
    beta: ArrayView1<'_, f64>,
    lambda: f64,
) -> f64 {
    let n = y.len() as f64;
    let fitted = x.dot(&beta);
    let r = &y.to_owned() - &fitted;
    let mut worst = 0.0_f64;
    for (j, is_active) in active.iter().enumerate() {
        if !is_active {
            continue;
        }
        let c = x.column(j).dot(&r) / n;
        let v = if beta[j] == 0.0 {
            (c.abs() - lambda).max(0.0)
        } else {
            (c - lambda * beta[j].signum()).abs()
        };
        worst = worst.max(v);
    }
    worst
}

/// Identifying metadata carried on a fitted model.
#[derive(Debug, Clone, Default)]
pub struct ModelMeta {
    pub feature_names: Vec<String>,
    pub outcome_name: String,
    pub data_hash: String,
}

/// A fitted penalty path with everything needed for prediction, including the
/// covariance-correction inputs: raw-stage standardized design and raw-scale
/// training residuals at every penalty value.
#[derive(Debug, Clone)]
pub struct PlmmModel {
    /// Intercept: the raw outcome mean.
    pub beta0: f64,
    pub eta: f64,
    pub lambdas: Vec<f64>,
    /// p x L coefficients on the original feature scale.
    pub beta_path: Array2<f64>,
    /// p x L coefficients on the rotated-standardized scale.
    pub beta_std_path: Array2<f64>,
    pub train_centers: Array1<f64>,
    pub train_scales: Array1<f64>,
    /// Raw-stage screening mask.
    pub active_raw: Vec<bool>,
    pub rot_centers: Array1<f64>,
    pub rot_scales: Array1<f64>,
    /// Final mask after both screening stages.
    pub active: Vec<bool>,
    /// n x L raw-scale residuals y - beta0 - X beta(lambda).
    pub residuals_path: Array2<f64>,
    /// Raw-stage standardized training design.
    pub train_x_std: Array2<f64>,
    /// Number of raw-active columns (the 1/p factor of the kinship).
    pub n_active_raw: usize,
    pub feature_names: Vec<String>,
    pub outcome_name: String,
    pub data_hash: String,
}

impl PlmmModel {
    pub fn n(&self) -> usize {
        self.train_x_std.nrows()
    }

    pub fn p(&self) -> usize {
        self.beta_path.nrows()
    }

    pub fn n_lambda(&self) -> usize {
        self.lambdas.len()
    }

    /// Number of selected features (intercept excluded) at a path position.
    pub fn nvar(&self, lambda_index: usize) -> usize {
        self.beta_path
            .column(lambda_index)
            .iter()
            .filter(|b| **b != 0.0)
            .count()
    }

    pub fn check_lambda_index(&self, index: usize) -> Result<()> {
        if index >= self.lambdas.len() {
            return Err(PlmmError::LambdaIndexOutOfRange {
                index,
                len: self.lambdas.len(),
            });
        }
        Ok(())
    }
}

/// Fit the whole path on rotated data and assemble the model.
pub fn fit_path(
    rot: &RotatedData,
    path: &LambdaPath,
    xstd: &StandardizedMatrix,
    y_raw: ArrayView1<'_, f64>,
    eta: f64,
    meta: ModelMeta,
    settings: &CdSettings,
) -> Result<PlmmModel> {
    let n = xstd.n();
    let p = xstd.p();
    if rot.n() != n || rot.p() != p {
        return Err(PlmmError::DimensionMismatch {
            what: "rotated vs standardized shape",
            expected: n,
            got: rot.n(),
        });
    }
    if y_raw.len() != n {
        return Err(PlmmError::DimensionMismatch {
            what: "outcome length",
            expected: n,
            got: y_raw.len(),
        });
    }
    let beta0 = y_raw.sum() / n as f64;
    let beta_std_path = cd_solve_path(
        rot.xrot.view(),
        rot.yrot.view(),
        &rot.active,
        &path.lambdas,
        settings,
    )?;
    let n_lambda = path.lambdas.len();

    // back-transform through both standardization stages
    let mut beta_path = Array2::zeros((p, n_lambda));
    for j in 0..p {
        if !rot.active[j] {
            continue;
        }
        let denom = xstd.scales[j] * rot.rot_scales[j];
        for l in 0..n_lambda {
            beta_path[[j, l]] = beta_std_path[[j, l]] / denom;
        }
    }

    // raw-scale training residuals, reconstructing raw columns from the
    // standardized values (exact for every active column)
    let active_idx: Vec<usize> = rot
        .active
        .iter()
        .enumerate()
        .filter_map(|(j, a)| a.then_some(j))
        .collect();
    let mut residuals_path = Array2::zeros((n, n_lambda));
    let mut raw_active = Array2::zeros((n, active_idx.len()));
    for (col, &j) in active_idx.iter().enumerate() {
        let c = xstd.centers[j];
        let s = xstd.scales[j];
        for i in 0..n {
            raw_active[[i, col]] = xstd.values[[i, j]] * s + c;
        }
    }
    let beta_active = beta_path.select(ndarray::Axis(0), &active_idx);
    let fitted = raw_active.dot(&beta_active);
    for i in 0..n {
        for l in 0..n_lambda {
            residuals_path[[i, l]] = y_raw[i] - beta0 - fitted[[i, l]];
        }
    }

    let feature_names = if meta.feature_names.len() == p {
        meta.feature_names
    } else {
        (1..=p).map(|j| format!("x{j}")).collect()
    };
    let outcome_name = if meta.outcome_name.is_empty() {
        "y".to_string()
    } else {
        meta.outcome_name
    };

    Ok(PlmmModel {
        beta0,
        eta,
        lambdas: path.lambdas.clone(),
        beta_path,
        beta_std_path,
        train_centers: xstd.centers.clone(),
        train_scales: xstd.scales.clone(),
        active_raw: xstd.active.clone(),
        rot_centers: rot.rot_centers.clone(),
        rot_scales: rot.rot_scales.clone(),
        active: rot.active.clone(),
        residuals_path,
        train_x_std: xstd.values.clone(),
        n_active_raw: xstd.n_active(),
        feature_names,
        outcome_name,
        data_hash: meta.data_hash,
    })
}

/// beta0 + X beta(lambda) on the original feature scale.
pub fn predict_linear(
    model: &PlmmModel,
    x_new: ArrayView2<'_, f64>,
    lambda_index: usize,
) -> Result<Array1<f64>> {
    model.check_lambda_index(lambda_index)?;
    if x_new.ncols() != model.p() {
        return Err(PlmmError::DimensionMismatch {
            what: "prediction columns",
            expected: model.p(),
            got: x_new.ncols(),
        });
    }
    let beta = model.beta_path.column(lambda_index);
    let mut out = x_new.dot(&beta);
    out += model.beta0;
    Ok(out)
}

/// Plain lasso on standardized raw data: the pipeline any off-the-shelf
/// solver runs, with per-lambda intercepts on the input scale. Used for
/// the outer CV fold fits and as the eta = 0 reference.
pub struct PlainLassoFit {
    /// p x L coefficients on the input scale.
    pub beta: Array2<f64>,
    /// Per-lambda intercepts on the input scale.
    pub intercepts: Vec<f64>,
}

pub fn plain_lasso_path(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    variance_threshold: f64,
    lambdas: &[f64],
    settings: &CdSettings,
) -> Result<PlainLassoFit> {
    let std = crate::data::standardize(x, variance_threshold)?;
    let n = y.len();
    if std.n() != n {
        return Err(PlmmError::DimensionMismatch {
            what: "outcome length",
            expected: std.n(),
            got: n,
        });
    }
    let y_mean = y.sum() / n as f64;
    let yc = y.to_owned() - y_mean;
    let b_std = cd_solve_path(std.values.view(), yc.view(), &std.active, lambdas, settings)?;
    let p = std.p();
    let mut beta = Array2::zeros((p, lambdas.len()));
    let mut intercepts = vec![y_mean; lambdas.len()];
    for j in 0..p {
        if !std.active[j] {
            continue;
        }
        for l in 0..lambdas.len() {
            let bj = b_std[[j, l]] / std.scales[j];
            beta[[j, l]] = bj;
            intercepts[l] -= bj * std.centers[j];
        }
    }
    Ok(PlainLassoFit { beta, intercepts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{standardize, DEFAULT_VARIANCE_THRESHOLD};
    use crate::decomposition::{build_preconditioner, compute_kinship, eigendecompose};
    use crate::random;
    use crate::rotation::rotate;
    use ndarray::array;

    fn toy_rotated(seed: u64, n: usize, p: usize, eta: f64) -> (RotatedData, StandardizedMatrix, Array1<f64>) {
        let mut rng = random::seeded(seed);
        let x = random::standard_normal_matrix(&mut rng, n, p);
        let signal = x.column(0).to_owned();
        let noise = random::standard_normal_vector(&mut rng, n);
        let y = signal.mapv(|v| 1.5 * v) + noise * 0.5;
        let std = standardize(x.view(), DEFAULT_VARIANCE_THRESHOLD).unwrap();
        let spec = eigendecompose(&compute_kinship(&std).unwrap()).unwrap();
        let pre = build_preconditioner(&spec, eta).unwrap();
        let y_mean = y.sum() / n as f64;
        let yc = &y - y_mean;
        let rot = rotate(&pre, &std, yc.view(), DEFAULT_VARIANCE_THRESHOLD).unwrap();
        (rot, std, y)
    }

    #[test]
    fn lambda_max_shrinks_everything_to_zero() {
        let (rot, std, y) = toy_rotated(1, 25, 6, 0.4);
        let path = make_lambda_path(&rot, 30, 0.01).unwrap();
        let model = fit_path(
            &rot,
            &path,
            &std,
            y.view(),
            0.4,
            ModelMeta::default(),
            &CdSettings::default(),
        )
        .unwrap();
        assert_eq!(model.nvar(0), 0);
        let preds = predict_linear(&model, model_raw_x(&std).view(), 0).unwrap();
        for p in preds.iter() {
            assert!((p - model.beta0).abs() < 1e-12);
        }
    }

    fn model_raw_x(std: &StandardizedMatrix) -> Array2<f64> {
        let (n, p) = std.values.dim();
        let mut out = Array2::zeros((n, p));
        for j in 0..p {
            for i in 0..n {
                out[[i, j]] = std.values[[i, j]] * std.scales[j] + std.centers[j];
            }
        }
        out
    }

    #[test]
    fn lambda_max_matches_single_column_correlation() {
        // one active column with xᵀy/n = 0.7
        let x = array![[1.0_f64], [-1.0], [1.0], [-1.0]];
        let y = array![0.7_f64, -0.7, 0.7, -0.7];
        let rot = RotatedData {
            xrot: x.clone(),
            yrot: y,
            rot_centers: Array1::zeros(1),
            rot_scales: Array1::ones(1),
            active: vec![true],
            eta: 0.0,
        };
        let path = make_lambda_path(&rot, 5, 0.1).unwrap();
        assert!((path.lambdas[0] - 0.7).abs() < 1e-15);
        assert!((path.lambdas[4] - 0.07).abs() < 1e-15);
    }

    #[test]
    fn orthogonal_outcome_is_a_degenerate_path() {
        let x = array![[1.0_f64], [-1.0]];
        let y = array![1.0_f64, 1.0];
        let rot = RotatedData {
            xrot: x,
            yrot: y,
            rot_centers: Array1::zeros(1),
            rot_scales: Array1::ones(1),
            active: vec![true],
            eta: 0.0,
        };
        assert!(matches!(
            make_lambda_path(&rot, 5, 0.1),
            Err(PlmmError::DegeneratePath)
        ));
    }

    #[test]
    fn kkt_holds_along_the_path() {
        let (rot, std, y) = toy_rotated(3, 40, 10, 0.6);
        let path = make_lambda_path(&rot, 50, 0.01).unwrap();
        let model = fit_path(
            &rot,
            &path,
            &std,
            y.view(),
            0.6,
            ModelMeta::default(),
            &CdSettings::default(),
        )
        .unwrap();
        for (l, &lambda) in path.lambdas.iter().enumerate() {
            let v = kkt_violation(
                rot.xrot.view(),
                rot.yrot.view(),
                &rot.active,
                model.beta_std_path.column(l),
                lambda,
            );
            assert!(v <= 1e-4, "lambda index {l}: violation {v}");
        }
    }

    #[test]
    fn objective_never_increases_within_a_sweep_sequence() {
        let (rot, _, _) = toy_rotated(5, 30, 8, 0.5);
        let x = rot.xrot.view();
        let y = rot.yrot.view();
        let nf = 30.0;
        let x_cols: Vec<Array1<f64>> = (0..8).map(|j| x.column(j).to_owned()).collect();
        let xtx_n: Vec<f64> = x_cols.iter().map(|c| c.dot(c) / nf).collect();
        let cols: Vec<usize> = (0..8).collect();
        let mut beta = vec![0.0; 8];
        let mut r = y.to_owned();
        let lambda = 0.05;
        let mut last = penalized_objective(x, y, &beta, lambda);
        for _ in 0..25 {
            cd_sweep(&cols, &x_cols, &xtx_n, &mut r, &mut beta, lambda, nf);
            let obj = penalized_objective(x, y, &beta, lambda);
            assert!(obj <= last + 1e-12);
            last = obj;
        }
    }

    #[test]
    fn warm_and_cold_starts_agree() {
        let (rot, _, _) = toy_rotated(7, 35, 9, 0.3);
        let path = make_lambda_path(&rot, 25, 0.02).unwrap();
        let settings = CdSettings::default();
        let warm = cd_solve_path(
            rot.xrot.view(),
            rot.yrot.view(),
            &rot.active,
            &path.lambdas,
            &settings,
        )
        .unwrap();
        for (l, &lambda) in path.lambdas.iter().enumerate() {
            let cold = cd_solve_path(
                rot.xrot.view(),
                rot.yrot.view(),
                &rot.active,
                &[lambda],
                &settings,
            )
            .unwrap();
            for j in 0..9 {
                assert!(
                    (warm[[j, l]] - cold[[j, 0]]).abs() <= 1e-5,
                    "j={j} l={l}: {} vs {}",
                    warm[[j, l]],
                    cold[[j, 0]]
                );
            }
        }
    }

    #[test]
    fn non_convergence_reports_the_lambda() {
        let (rot, _, _) = toy_rotated(9, 30, 8, 0.5);
        let path = make_lambda_path(&rot, 10, 0.001).unwrap();
        let settings = CdSettings {
            tol: 1e-12,
            max_sweeps: 2,
        };
        let err = cd_solve_path(
            rot.xrot.view(),
            rot.yrot.view(),
            &rot.active,
            &path.lambdas,
            &settings,
        )
        .unwrap_err();
        match err {
            PlmmError::NonConvergence { lambda, max_sweeps } => {
                assert_eq!(max_sweeps, 2);
                assert!(path.lambdas.contains(&lambda));
            }
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn affine_prediction_arithmetic() {
        let model = PlmmModel {
            beta0: 1.0,
            eta: 0.0,
            lambdas: vec![0.5],
            beta_path: array![[2.0]],
            beta_std_path: array![[2.0]],
            train_centers: Array1::zeros(1),
            train_scales: Array1::ones(1),
            active_raw: vec![true],
            rot_centers: Array1::zeros(1),
            rot_scales: Array1::ones(1),
            active: vec![true],
            residuals_path: Array2::zeros((2, 1)),
            train_x_std: Array2::zeros((2, 1)),
            n_active_raw: 1,
            feature_names: vec!["x1".into()],
            outcome_name: "y".into(),
            data_hash: String::new(),
        };
        let preds = predict_linear(&model, array![[3.0]].view(), 0).unwrap();
        assert_eq!(preds[0], 7.0);
        assert!(matches!(
            predict_linear(&model, array![[3.0]].view(), 5),
            Err(PlmmError::LambdaIndexOutOfRange { .. })
        ));
        assert!(matches!(
            predict_linear(&model, array![[3.0, 1.0]].view(), 0),
            Err(PlmmError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn original_scale_and_standardized_scale_predictions_agree() {
        let (rot, std, y) = toy_rotated(11, 30, 7, 0.5);
        let path = make_lambda_path(&rot, 20, 0.05).unwrap();
        let model = fit_path(
            &rot,
            &path,
            &std,
            y.view(),
            0.5,
            ModelMeta::default(),
            &CdSettings::default(),
        )
        .unwrap();
        let mut rng = random::seeded(12);
        let x_new = random::standard_normal_matrix(&mut rng, 6, 7);
        for l in [0, 10, 19] {
            let direct = predict_linear(&model, x_new.view(), l).unwrap();
            // alternative route: standardize the new rows with the training
            // parameters and use coefficients on that scale
            let xs = crate::data::apply_standardization(
                x_new.view(),
                model.train_centers.view(),
                model.train_scales.view(),
                &model.active_raw,
            )
            .unwrap();
            for i in 0..6 {
                let mut pred = model.beta0;
                for j in 0..7 {
                    if model.active[j] {
                        let b_rawstd = model.beta_std_path[[j, l]] / model.rot_scales[j];
                        pred += xs[[i, j]] * b_rawstd
                            + model.train_centers[j] * model.beta_path[[j, l]];
                    }
                }
                assert!((pred - direct[i]).abs() < 1e-8, "i={i} l={l}");
            }
        }
    }

    #[test]
    fn intercept_column_is_inert_on_rotated_data() {
        // appending an explicit unpenalized intercept column must not move
        // the penalized coefficients, because the fitted columns are centered
        let (rot, _, _) = toy_rotated(13, 40, 6, 0.7);
        let path = make_lambda_path(&rot, 15, 0.05).unwrap();
        let settings = CdSettings::default();
        let plain = cd_solve_path(
            rot.xrot.view(),
            rot.yrot.view(),
            &rot.active,
            &path.lambdas,
            &settings,
        )
        .unwrap();
        let with_icpt = cd_solve_path_with_intercept(
            rot.xrot.view(),
            rot.yrot.view(),
            &rot.active,
            &path.lambdas,
        );
        for j in 0..6 {
            for l in 0..15 {
                assert!(
                    (plain[[j, l]] - with_icpt[[j, l]]).abs() <= 1e-6,
                    "j={j} l={l}"
                );
            }
        }
    }

    // reference solver with an explicit unpenalized intercept coordinate
    fn cd_solve_path_with_intercept(
        x: ArrayView2<'_, f64>,
        y: ArrayView1<'_, f64>,
        active: &[bool],
        lambdas: &[f64],
    ) -> Array2<f64> {
        let (n, p) = x.dim();
        let nf = n as f64;
        let mut beta = vec![0.0_f64; p];
        let mut icpt = 0.0_f64;
        let mut r = y.to_owned();
        let mut out = Array2::zeros((p, lambdas.len()));
        for (l, &lambda) in lambdas.iter().enumerate() {
            for _ in 0..200_000 {
                let mut change = 0.0_f64;
                let mean_r = r.sum() / nf;
                if mean_r != 0.0 {
                    icpt += mean_r;
                    r -= mean_r;
                    change = change.max(mean_r.abs());
                }
                for j in 0..p {
                    if !active[j] {
                        continue;
                    }
                    let col = x.column(j);
                    let xtx = col.dot(&col) / nf;
                    let old = beta[j];
                    let z = col.dot(&r) / nf + xtx * old;
                    let new = soft_threshold(z, lambda) / xtx;
                    if new != old {
                        let diff = old - new;
                        let mut rr = r.view_mut();
                        rr.scaled_add(diff, &col);
                        beta[j] = new;
                        change = change.max((new - old).abs());
                    }
                }
                if change < 1e-9 {
                    break;
                }
            }
            for j in 0..p {
                out[[j, l]] = beta[j];
            }
        }
        let _ = icpt;
        out
    }
}
