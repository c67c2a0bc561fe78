//! K-fold cross-validation in three variants that differ in how much of the
//! preprocessing pipeline is redone inside each fold.
//!
//! * full  — per fold: re-standardize, rebuild the kinship spectrum,
//!   re-estimate eta, re-rotate, refit; held-out rows are predicted with the
//!   covariance correction on the fold's own scale. Nothing computed from
//!   held-out rows touches the fold fit.
//! * inner — the spectrum and eta come from the whole dataset; each fold
//!   whitens its training rows with the subsetted eigenvector rows and the
//!   full-data weights, then refits.
//! * outer — the data are whitened once; each fold subsets rotated rows, fits
//!   a plain lasso, and is scored on the rotated scale. This is what running
//!   off-the-shelf CV on preconditioned data does.
//!
//! All folds and strategies share one penalty grid, computed from a full-data
//! fit, so error curves are comparable.

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blup::{predict_blup_path, BlupMode, FullDataContext};
use crate::data::{standardize, Dataset, StandardizedMatrix};
use crate::decomposition::{build_preconditioner, compute_kinship, eigendecompose};
use crate::error::{PlmmError, Result};
use crate::lasso::{fit_path, plain_lasso_path, LambdaPath, ModelMeta, PlmmModel};
use crate::pipeline::{fit_matrix, FitOptions, FitOutput};
use crate::random;
use crate::rotation::{rotate_raw, rotate_with_matrix};
use crate::variance::{estimate_eta, EtaOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CvStrategy {
    Full,
    Inner,
    Outer,
}

impl CvStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            CvStrategy::Full => "full",
            CvStrategy::Inner => "inner",
            CvStrategy::Outer => "outer",
        }
    }
}

impl std::str::FromStr for CvStrategy {
    type Err = PlmmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(CvStrategy::Full),
            "inner" => Ok(CvStrategy::Inner),
            "outer" => Ok(CvStrategy::Outer),
            other => Err(PlmmError::InvalidArgument(format!(
                "unknown CV strategy '{other}' (expected full, inner, or outer)"
            ))),
        }
    }
}

/// Seeded balanced partition of n rows into K folds, ids in 1..=K.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    pub fold_of: Vec<usize>,
    pub k: usize,
    pub seed: u64,
}

impl FoldAssignment {
    pub fn test_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|&i| self.fold_of[i] == fold)
            .collect()
    }

    pub fn train_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|&i| self.fold_of[i] != fold)
            .collect()
    }
}

pub fn assign_folds(n: usize, k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 || k > n {
        return Err(PlmmError::InvalidArgument(format!(
            "fold count must satisfy 2 <= K <= n, got K={k} with n={n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = random::seeded(seed);
    order.shuffle(&mut rng);
    let mut fold_of = vec![0; n];
    for (pos, &row) in order.iter().enumerate() {
        fold_of[row] = pos % k + 1;
    }
    Ok(FoldAssignment { fold_of, k, seed })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CvOptions {
    pub fit: FitOptions,
    /// Covariance-correction variant used for held-out prediction in the
    /// full strategy; Incorrect exists for the benchmark demos.
    pub blup_mode: BlupModeOption,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum BlupModeOption {
    #[default]
    Correct,
    Incorrect,
}

/// Chosen penalties from an error curve.
#[derive(Debug, Clone, Copy)]
pub struct LambdaSelection {
    pub min_index: usize,
    pub onese_index: usize,
    pub lambda_min: f64,
    pub lambda_1se: f64,
}

/// lambda_min minimizes the error (ties resolved toward the larger penalty,
/// i.e. the sparser model); lambda_1se is the largest penalty whose error
/// stays within one standard error of the minimum.
pub fn select_lambda(cve: &[f64], cvse: &[f64], lambdas: &[f64]) -> Result<LambdaSelection> {
    if cve.is_empty() || cve.len() != cvse.len() || cve.len() != lambdas.len() {
        return Err(PlmmError::InvalidArgument(
            "cve, cvse and lambdas must be nonempty and aligned".into(),
        ));
    }
    let mut min_index = 0;
    for l in 1..cve.len() {
        if cve[l] < cve[min_index] {
            min_index = l;
        }
    }
    let threshold = cve[min_index] + cvse[min_index];
    let onese_index = (0..cve.len())
        .find(|&l| cve[l] <= threshold)
        .expect("the minimizer satisfies the threshold");
    Ok(LambdaSelection {
        min_index,
        onese_index,
        lambda_min: lambdas[min_index],
        lambda_1se: lambdas[onese_index],
    })
}

#[derive(Debug, Clone)]
pub struct CvResult {
    pub strategy: CvStrategy,
    pub lambdas: Vec<f64>,
    pub cve: Vec<f64>,
    pub cvse: Vec<f64>,
    pub min_index: usize,
    pub onese_index: usize,
    pub lambda_min: f64,
    pub lambda_1se: f64,
    pub nvar_at_min: usize,
    pub nvar_at_1se: usize,
    /// Model size along the shared grid, from the full-data reference fit.
    pub nvar_path: Vec<usize>,
    /// Held-out predictions, one row per observation, one column per lambda.
    pub heldout_predictions: Array2<f64>,
    /// What those predictions are scored against (raw y, or the rotated
    /// outcome for the outer strategy).
    pub heldout_targets: Array1<f64>,
    pub folds: FoldAssignment,
}

impl CvResult {
    /// Re-derive the error curve from the stored held-out predictions.
    pub fn recompute_cve(&self) -> Vec<f64> {
        cve_from_predictions(
            self.heldout_predictions.view(),
            self.heldout_targets.view(),
        )
        .0
    }
}

fn cve_from_predictions(
    preds: ndarray::ArrayView2<'_, f64>,
    targets: ndarray::ArrayView1<'_, f64>,
) -> (Vec<f64>, Vec<f64>) {
    let (n, l) = preds.dim();
    let nf = n as f64;
    let mut cve = Vec::with_capacity(l);
    let mut cvse = Vec::with_capacity(l);
    for col in 0..l {
        let mut mean = 0.0;
        for i in 0..n {
            let e = targets[i] - preds[[i, col]];
            mean += e * e;
        }
        mean /= nf;
        let mut var = 0.0;
        for i in 0..n {
            let e = targets[i] - preds[[i, col]];
            let d = e * e - mean;
            var += d * d;
        }
        let sd = (var / (nf - 1.0)).sqrt();
        cve.push(mean);
        cvse.push(sd / nf.sqrt());
    }
    (cve, cvse)
}

/// Shared penalty grid plus the full-data reference fit it came from.
#[derive(Debug, Clone)]
pub struct CvContext {
    pub grid: LambdaPath,
    pub reference: FitOutput,
}

pub fn prepare_cv_context(data: &Dataset, options: &CvOptions) -> Result<CvContext> {
    let reference = fit_matrix(
        data.x.view(),
        data.y.view(),
        Some(&data.feature_names),
        Some(&data.outcome_name),
        &options.fit,
        None,
        None,
    )?;
    let grid = LambdaPath {
        lambdas: reference.model.lambdas.clone(),
        min_ratio: reference
            .model
            .lambdas
            .last()
            .copied()
            .unwrap_or(1.0)
            / reference.model.lambdas[0],
    };
    Ok(CvContext { grid, reference })
}

/// Fit one fold of the full strategy from its training rows alone.
pub fn full_fold_model(
    x_train: ndarray::ArrayView2<'_, f64>,
    y_train: ndarray::ArrayView1<'_, f64>,
    grid: &LambdaPath,
    options: &CvOptions,
) -> Result<PlmmModel> {
    Ok(fit_matrix(
        x_train,
        y_train,
        None,
        None,
        &options.fit,
        Some(grid),
        None,
    )?
    .model)
}

struct FoldPrediction {
    test_rows: Vec<usize>,
    predictions: Array2<f64>,
}

fn run_full_fold(
    data: &Dataset,
    folds: &FoldAssignment,
    fold: usize,
    grid: &LambdaPath,
    options: &CvOptions,
    full_std: Option<&StandardizedMatrix>,
) -> Result<FoldPrediction> {
    let train_rows = folds.train_rows(fold);
    let test_rows = folds.test_rows(fold);
    if train_rows.len() < 2 {
        return Err(PlmmError::FoldTooSmall {
            fold,
            n_train: train_rows.len(),
        });
    }
    let x_tr = data.x.select(Axis(0), &train_rows);
    let y_tr = data.y.select(Axis(0), &train_rows);
    let model = full_fold_model(x_tr.view(), y_tr.view(), grid, options)?;
    let x_te = data.x.select(Axis(0), &test_rows);
    let predictions = match options.blup_mode {
        BlupModeOption::Correct => {
            predict_blup_path(&model, x_te.view(), BlupMode::Correct, None)?
        }
        BlupModeOption::Incorrect => {
            let ctx = FullDataContext {
                xstd_full: full_std.expect("full-data standardization precomputed").clone(),
                train_rows: train_rows.clone(),
                test_rows: test_rows.clone(),
            };
            predict_blup_path(&model, x_te.view(), BlupMode::Incorrect, Some(&ctx))?
        }
    };
    Ok(FoldPrediction {
        test_rows,
        predictions,
    })
}

struct InnerSetup {
    xstd_full: StandardizedMatrix,
    pre: crate::decomposition::Preconditioner,
    eta: f64,
}

fn prepare_inner(data: &Dataset, options: &CvOptions) -> Result<InnerSetup> {
    let xstd_full = standardize(data.x.view(), options.fit.variance_threshold)?;
    let spectrum = eigendecompose(&compute_kinship(&xstd_full)?)?;
    let y_mean = data.y.sum() / data.n() as f64;
    let y_centered = &data.y - y_mean;
    let eta = match options.fit.eta_override {
        Some(e) => e,
        None => {
            estimate_eta(
                &spectrum,
                y_centered.view(),
                &EtaOptions {
                    grid_size: options.fit.eta_grid,
                    ..EtaOptions::default()
                },
            )?
            .eta
        }
    };
    let pre = build_preconditioner(&spectrum, eta)?;
    Ok(InnerSetup {
        xstd_full,
        pre,
        eta,
    })
}

fn run_inner_fold(
    data: &Dataset,
    folds: &FoldAssignment,
    fold: usize,
    grid: &LambdaPath,
    options: &CvOptions,
    setup: &InnerSetup,
) -> Result<FoldPrediction> {
    let train_rows = folds.train_rows(fold);
    let test_rows = folds.test_rows(fold);
    if train_rows.len() < 2 {
        return Err(PlmmError::FoldTooSmall {
            fold,
            n_train: train_rows.len(),
        });
    }
    // whole-dataset standardization and weights, subsetted rows of U
    let m_k = setup.pre.subset_matrix(&train_rows);
    let fold_std = StandardizedMatrix {
        values: setup.xstd_full.values.select(Axis(0), &train_rows),
        centers: setup.xstd_full.centers.clone(),
        scales: setup.xstd_full.scales.clone(),
        active: setup.xstd_full.active.clone(),
    };
    let y_tr = data.y.select(Axis(0), &train_rows);
    let y_mean = y_tr.sum() / y_tr.len() as f64;
    let y_centered = &y_tr - y_mean;
    let rot = rotate_with_matrix(
        m_k.view(),
        &fold_std,
        y_centered.view(),
        options.fit.variance_threshold,
        setup.eta,
    )?;
    let model = fit_path(
        &rot,
        grid,
        &fold_std,
        y_tr.view(),
        setup.eta,
        ModelMeta::default(),
        &options.fit.cd,
    )?;
    let x_te = data.x.select(Axis(0), &test_rows);
    let predictions = predict_blup_path(&model, x_te.view(), BlupMode::Correct, None)?;
    Ok(FoldPrediction {
        test_rows,
        predictions,
    })
}

struct OuterSetup {
    xrot_raw: Array2<f64>,
    yrot: Array1<f64>,
}

fn prepare_outer(data: &Dataset, options: &CvOptions) -> Result<OuterSetup> {
    let xstd_full = standardize(data.x.view(), options.fit.variance_threshold)?;
    let spectrum = eigendecompose(&compute_kinship(&xstd_full)?)?;
    let y_mean = data.y.sum() / data.n() as f64;
    let y_centered = &data.y - y_mean;
    let eta = match options.fit.eta_override {
        Some(e) => e,
        None => {
            estimate_eta(
                &spectrum,
                y_centered.view(),
                &EtaOptions {
                    grid_size: options.fit.eta_grid,
                    ..EtaOptions::default()
                },
            )?
            .eta
        }
    };
    let pre = build_preconditioner(&spectrum, eta)?;
    let (xrot_raw, yrot) = rotate_raw(&pre, &xstd_full, y_centered.view())?;
    Ok(OuterSetup { xrot_raw, yrot })
}

fn run_outer_fold(
    folds: &FoldAssignment,
    fold: usize,
    grid: &LambdaPath,
    options: &CvOptions,
    setup: &OuterSetup,
) -> Result<FoldPrediction> {
    let train_rows = folds.train_rows(fold);
    let test_rows = folds.test_rows(fold);
    if train_rows.len() < 2 {
        return Err(PlmmError::FoldTooSmall {
            fold,
            n_train: train_rows.len(),
        });
    }
    let x_tr = setup.xrot_raw.select(Axis(0), &train_rows);
    let y_tr = setup.yrot.select(Axis(0), &train_rows);
    let fit = plain_lasso_path(
        x_tr.view(),
        y_tr.view(),
        options.fit.variance_threshold,
        &grid.lambdas,
        &options.fit.cd,
    )?;
    let x_te = setup.xrot_raw.select(Axis(0), &test_rows);
    let mut predictions = x_te.dot(&fit.beta);
    for (mut col, icpt) in predictions.columns_mut().into_iter().zip(&fit.intercepts) {
        col += *icpt;
    }
    Ok(FoldPrediction {
        test_rows,
        predictions,
    })
}

pub fn cross_validate_with_context(
    data: &Dataset,
    folds: &FoldAssignment,
    strategy: CvStrategy,
    options: &CvOptions,
    context: &CvContext,
) -> Result<CvResult> {
    let n = data.n();
    if folds.fold_of.len() != n {
        return Err(PlmmError::DimensionMismatch {
            what: "fold assignment length",
            expected: n,
            got: folds.fold_of.len(),
        });
    }
    let grid = &context.grid;
    let n_lambda = grid.n_lambda();
    let strategy_name = strategy.name();

    let full_std = match (strategy, options.blup_mode) {
        (CvStrategy::Full, BlupModeOption::Incorrect) => {
            Some(standardize(data.x.view(), options.fit.variance_threshold)?)
        }
        _ => None,
    };
    let inner_setup = match strategy {
        CvStrategy::Inner => Some(prepare_inner(data, options)?),
        _ => None,
    };
    let outer_setup = match strategy {
        CvStrategy::Outer => Some(prepare_outer(data, options)?),
        _ => None,
    };

    let fold_ids: Vec<usize> = (1..=folds.k).collect();
    let fold_results: Vec<Result<FoldPrediction>> = fold_ids
        .par_iter()
        .map(|&fold| {
            let run = match strategy {
                CvStrategy::Full => {
                    run_full_fold(data, folds, fold, grid, options, full_std.as_ref())
                }
                CvStrategy::Inner => run_inner_fold(
                    data,
                    folds,
                    fold,
                    grid,
                    options,
                    inner_setup.as_ref().expect("inner setup"),
                ),
                CvStrategy::Outer => run_outer_fold(
                    folds,
                    fold,
                    grid,
                    options,
                    outer_setup.as_ref().expect("outer setup"),
                ),
            };
            run.map_err(|e| e.in_fold(fold, strategy_name))
        })
        .collect();

    let mut heldout_predictions = Array2::zeros((n, n_lambda));
    for result in fold_results {
        let fold_pred = result?;
        for (local, &row) in fold_pred.test_rows.iter().enumerate() {
            for l in 0..n_lambda {
                heldout_predictions[[row, l]] = fold_pred.predictions[[local, l]];
            }
        }
    }
    let heldout_targets = match strategy {
        CvStrategy::Outer => outer_setup.expect("outer setup").yrot,
        _ => data.y.clone(),
    };

    let (cve, cvse) = cve_from_predictions(heldout_predictions.view(), heldout_targets.view());
    let selection = select_lambda(&cve, &cvse, &grid.lambdas)?;
    let nvar_path: Vec<usize> = (0..n_lambda)
        .map(|l| context.reference.model.nvar(l))
        .collect();

    Ok(CvResult {
        strategy,
        lambdas: grid.lambdas.clone(),
        cve,
        cvse,
        min_index: selection.min_index,
        onese_index: selection.onese_index,
        lambda_min: selection.lambda_min,
        lambda_1se: selection.lambda_1se,
        nvar_at_min: nvar_path[selection.min_index],
        nvar_at_1se: nvar_path[selection.onese_index],
        nvar_path,
        heldout_predictions,
        heldout_targets,
        folds: folds.clone(),
    })
}

pub fn cross_validate_with_folds(
    data: &Dataset,
    folds: &FoldAssignment,
    strategy: CvStrategy,
    options: &CvOptions,
) -> Result<CvResult> {
    let context = prepare_cv_context(data, options)?;
    cross_validate_with_context(data, folds, strategy, options, &context)
}

pub fn cross_validate(
    data: &Dataset,
    k: usize,
    seed: u64,
    strategy: CvStrategy,
    options: &CvOptions,
) -> Result<CvResult> {
    let folds = assign_folds(data.n(), k, seed)?;
    cross_validate_with_folds(data, &folds, strategy, options)
}

/// Run several strategies on the identical fold assignment and shared grid.
pub fn cross_validate_strategies(
    data: &Dataset,
    k: usize,
    seed: u64,
    strategies: &[CvStrategy],
    options: &CvOptions,
) -> Result<Vec<CvResult>> {
    let folds = assign_folds(data.n(), k, seed)?;
    let context = prepare_cv_context(data, options)?;
    strategies
        .iter()
        .map(|&s| cross_validate_with_context(data, &folds, s, options, &context))
        .collect()
}
