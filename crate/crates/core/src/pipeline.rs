//! End-to-end fitting pipeline: standardize, build the kinship spectrum,
//! estimate the structure fraction, whiten, and fit the penalty path.

use ndarray::{Array1, ArrayView1, ArrayView2};

use crate::data::{standardize, StandardizedMatrix, DEFAULT_VARIANCE_THRESHOLD};
use crate::decomposition::{build_preconditioner, compute_kinship, eigendecompose, Spectrum};
use crate::error::Result;
use crate::io::hash_xy;
use crate::lasso::{
    default_min_ratio, fit_path, make_lambda_path, CdSettings, LambdaPath, ModelMeta, PlmmModel,
};
use crate::rotation::{rotate, RotatedData};
use crate::variance::{estimate_eta, EtaEstimate, EtaOptions};
use crate::Dataset;

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    /// Skip estimation and use this structure fraction directly.
    pub eta_override: Option<f64>,
    pub eta_grid: usize,
    pub n_lambda: usize,
    /// Smallest-to-largest penalty ratio; defaults by data shape when None.
    pub min_ratio: Option<f64>,
    pub variance_threshold: f64,
    pub cd: CdSettings,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            eta_override: None,
            eta_grid: 100,
            n_lambda: 100,
            min_ratio: None,
            variance_threshold: DEFAULT_VARIANCE_THRESHOLD,
            cd: CdSettings::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitOutput {
    pub model: PlmmModel,
    pub rotated: RotatedData,
    pub spectrum: Spectrum,
    pub xstd: StandardizedMatrix,
    /// Present when eta was estimated rather than fixed.
    pub eta_estimate: Option<EtaEstimate>,
}

/// Fit on a raw matrix/outcome pair. A shared penalty grid may be supplied
/// (cross-validation folds do this); otherwise the grid is computed from the
/// rotated data. A precomputed spectrum may be supplied from a cache.
pub fn fit_matrix(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    names: Option<&[String]>,
    outcome: Option<&str>,
    options: &FitOptions,
    grid: Option<&LambdaPath>,
    spectrum: Option<Spectrum>,
) -> Result<FitOutput> {
    let n = x.nrows();
    let xstd = standardize(x, options.variance_threshold)?;
    let spectrum = match spectrum {
        Some(s) => s,
        None => {
            let kinship = compute_kinship(&xstd)?;
            eigendecompose(&kinship)?
        }
    };
    let y_mean = y.sum() / n as f64;
    let y_centered: Array1<f64> = &y.to_owned() - y_mean;
    let (eta, eta_estimate) = match options.eta_override {
        Some(eta) => (eta, None),
        None => {
            let est = estimate_eta(
                &spectrum,
                y_centered.view(),
                &EtaOptions {
                    grid_size: options.eta_grid,
                    ..EtaOptions::default()
                },
            )?;
            (est.eta, Some(est))
        }
    };
    let pre = build_preconditioner(&spectrum, eta)?;
    let rotated = rotate(&pre, &xstd, y_centered.view(), options.variance_threshold)?;
    let path = match grid {
        Some(g) => g.clone(),
        None => {
            let min_ratio = options
                .min_ratio
                .unwrap_or_else(|| default_min_ratio(n, x.ncols()));
            make_lambda_path(&rotated, options.n_lambda, min_ratio)?
        }
    };
    let meta = ModelMeta {
        feature_names: names.map(|s| s.to_vec()).unwrap_or_default(),
        outcome_name: outcome.unwrap_or("y").to_string(),
        data_hash: hash_xy(x, y),
    };
    let model = fit_path(&rotated, &path, &xstd, y, eta, meta, &options.cd)?;
    Ok(FitOutput {
        model,
        rotated,
        spectrum,
        xstd,
        eta_estimate,
    })
}

pub fn fit_dataset(dataset: &Dataset, options: &FitOptions) -> Result<FitOutput> {
    fit_matrix(
        dataset.x.view(),
        dataset.y.view(),
        Some(&dataset.feature_names),
        Some(&dataset.outcome_name),
        options,
        None,
        None,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{generate_correlated_data, GeneratorParams};

    #[test]
    fn intercept_is_the_outcome_mean() {
        let sim = generate_correlated_data(
            &GeneratorParams {
                n: 30,
                p: 12,
                s: 2,
                gamma: 3.0,
                beta: 2.0,
                b: 6,
            },
            7,
        )
        .unwrap();
        let ds = sim.to_dataset();
        let fit = fit_dataset(&ds, &FitOptions::default()).unwrap();
        let mean = ds.y.sum() / ds.n() as f64;
        assert!((fit.model.beta0 - mean).abs() < 1e-12);
        assert!(fit.eta_estimate.is_some());
    }

    #[test]
    fn eta_override_skips_estimation() {
        let sim = generate_correlated_data(
            &GeneratorParams {
                n: 20,
                p: 8,
                s: 2,
                gamma: 2.0,
                beta: 1.0,
                b: 4,
            },
            8,
        )
        .unwrap();
        let ds = sim.to_dataset();
        let fit = fit_dataset(
            &ds,
            &FitOptions {
                eta_override: Some(0.25),
                ..FitOptions::default()
            },
        )
        .unwrap();
        assert_eq!(fit.model.eta, 0.25);
        assert!(fit.eta_estimate.is_none());
    }
}
