//! Ground-truth data generation, per-replicate metrics, and the benchmark
//! harness that drives the cross-validation comparisons.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::blup::{predict_blup, BlupMode};
use crate::cv::{
    assign_folds, cross_validate_with_context, prepare_cv_context, BlupModeOption, CvOptions,
    CvStrategy,
};
use crate::data::Dataset;
use crate::error::{PlmmError, Result};
use crate::pipeline::FitOptions;
use crate::random::{derive_seed, seeded, standard_normal_matrix, standard_normal_vector};

/// Synthetic data with known truth: y = X beta + Z gamma + eps.
#[derive(Debug, Clone)]
pub struct SimDataset {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
    pub beta_true: Array1<f64>,
    /// n x B batch indicator matrix; every row has exactly one 1.
    pub z: Array2<f64>,
    /// B equally spaced confounder effects spanning [-gamma, gamma].
    pub gamma: Array1<f64>,
    /// 1-based batch membership per row.
    pub batch_id: Vec<usize>,
    pub seed: u64,
}

impl SimDataset {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn to_dataset(&self) -> Dataset {
        Dataset::new(
            self.x.clone(),
            self.y.clone(),
            (1..=self.p()).map(|j| format!("x{j}")).collect(),
            (1..=self.n()).map(|i| i.to_string()).collect(),
            "y".to_string(),
        )
        .expect("generator output is a valid dataset")
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub n: usize,
    pub p: usize,
    /// Number of true signals (the leading features).
    pub s: usize,
    /// Bound of the confounder magnitudes.
    pub gamma: f64,
    /// Signal magnitude.
    pub beta: f64,
    /// Number of batches; must divide n.
    pub b: usize,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        GeneratorParams {
            n: 100,
            p: 256,
            s: 4,
            gamma: 6.0,
            beta: 2.0,
            b: 20,
        }
    }
}

fn equally_spaced(bound: f64, count: usize) -> Array1<f64> {
    if count == 1 {
        return Array1::from_vec(vec![-bound]);
    }
    Array1::from_iter(
        (0..count).map(|i| -bound + 2.0 * bound * i as f64 / (count - 1) as f64),
    )
}

fn indicator_matrix(batch_id: &[usize], b: usize) -> Array2<f64> {
    let mut z = Array2::zeros((batch_id.len(), b));
    for (i, &g) in batch_id.iter().enumerate() {
        z[[i, g - 1]] = 1.0;
    }
    z
}

/// Batch-structured generator: X is standard normal noise plus a per-batch
/// mean shift, batches are contiguous blocks of n/B rows, and the outcome
/// follows y = X beta + Z gamma + eps with unit-variance noise.
pub fn generate_correlated_data(params: &GeneratorParams, seed: u64) -> Result<SimDataset> {
    let GeneratorParams {
        n,
        p,
        s,
        gamma,
        beta,
        b,
    } = *params;
    if b == 0 || n % b != 0 {
        return Err(PlmmError::InvalidArgument(format!(
            "batch count must divide n: n={n}, B={b}"
        )));
    }
    if s > p {
        return Err(PlmmError::InvalidArgument(format!(
            "signal count exceeds feature count: s={s}, p={p}"
        )));
    }
    let mut rng = seeded(seed);
    let mu = standard_normal_matrix(&mut rng, b, p);
    let per_batch = n / b;
    let batch_id: Vec<usize> = (0..n).map(|i| i / per_batch + 1).collect();
    let mut x = standard_normal_matrix(&mut rng, n, p);
    for (i, &g) in batch_id.iter().enumerate() {
        let mu_row = mu.row(g - 1);
        for (v, m) in x.row_mut(i).iter_mut().zip(mu_row.iter()) {
            *v += m;
        }
    }
    let mut beta_true = Array1::zeros(p);
    for j in 0..s {
        beta_true[j] = beta;
    }
    let gamma_vec = equally_spaced(gamma, b);
    let z = indicator_matrix(&batch_id, b);
    let eps = standard_normal_vector(&mut rng, n);
    let y = x.dot(&beta_true) + z.dot(&gamma_vec) + eps;
    Ok(SimDataset {
        x,
        y,
        beta_true,
        z,
        gamma: gamma_vec,
        batch_id,
        seed,
    })
}

/// Overlay a synthetic confounder on an existing design: rows are assigned
/// uniformly to B levels, s random features become signals of magnitude
/// beta_mag, and the outcome is regenerated with unit-variance noise.
pub fn inject_confounder(
    x_real: ArrayView2<'_, f64>,
    b: usize,
    gamma_mag: f64,
    beta_mag: f64,
    s: usize,
    seed: u64,
) -> Result<SimDataset> {
    let (n, p) = x_real.dim();
    if s > p {
        return Err(PlmmError::InvalidArgument(format!(
            "signal count exceeds feature count: s={s}, p={p}"
        )));
    }
    if b == 0 {
        return Err(PlmmError::InvalidArgument("need at least one level".into()));
    }
    let mut rng = seeded(seed);
    let batch_id: Vec<usize> = (0..n).map(|_| rng.random_range(0..b) + 1).collect();
    let mut feature_order: Vec<usize> = (0..p).collect();
    feature_order.shuffle(&mut rng);
    let mut beta_true = Array1::zeros(p);
    for &j in feature_order.iter().take(s) {
        beta_true[j] = beta_mag;
    }
    let gamma_vec = equally_spaced(gamma_mag, b);
    let z = indicator_matrix(&batch_id, b);
    let eps = standard_normal_vector(&mut rng, n);
    let y = x_real.dot(&beta_true) + z.dot(&gamma_vec) + eps;
    Ok(SimDataset {
        x: x_real.to_owned(),
        y,
        beta_true,
        z,
        gamma: gamma_vec,
        batch_id,
        seed,
    })
}

/// Per-replicate, per-strategy evaluation metrics.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SimMetrics {
    /// Fraction of true signals selected.
    pub tdr: f64,
    /// Fraction of selections that are null features (0 when nothing is selected).
    pub fdr: f64,
    /// Number of selected features, intercept excluded.
    pub nvar: usize,
    /// l2 distance between estimated and true coefficients, original scale.
    pub rsee: f64,
    /// Cross-validation error at the chosen penalty (attached by the harness).
    pub cve: f64,
    /// Held-out mean squared prediction error (NaN when there is no holdout).
    pub mspe: f64,
}

pub fn compute_metrics(
    beta_hat: ArrayView1<'_, f64>,
    beta_true: ArrayView1<'_, f64>,
    y_test: Option<ArrayView1<'_, f64>>,
    y_hat: Option<ArrayView1<'_, f64>>,
) -> Result<SimMetrics> {
    if beta_hat.len() != beta_true.len() {
        return Err(PlmmError::DimensionMismatch {
            what: "coefficient length",
            expected: beta_true.len(),
            got: beta_hat.len(),
        });
    }
    let selected: Vec<usize> = (0..beta_hat.len())
        .filter(|&j| beta_hat[j] != 0.0)
        .collect();
    let true_set: Vec<usize> = (0..beta_true.len())
        .filter(|&j| beta_true[j] != 0.0)
        .collect();
    let true_hits = selected.iter().filter(|j| beta_true[**j] != 0.0).count();
    let tdr = if true_set.is_empty() {
        0.0
    } else {
        true_hits as f64 / true_set.len() as f64
    };
    let fdr = if selected.is_empty() {
        0.0
    } else {
        (selected.len() - true_hits) as f64 / selected.len() as f64
    };
    let rsee = beta_hat
        .iter()
        .zip(beta_true.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let mspe = match (y_test, y_hat) {
        (Some(yt), Some(yh)) => {
            if yt.len() != yh.len() {
                return Err(PlmmError::DimensionMismatch {
                    what: "test outcome length",
                    expected: yt.len(),
                    got: yh.len(),
                });
            }
            yt.iter()
                .zip(yh.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                / yt.len() as f64
        }
        _ => f64::NAN,
    };
    Ok(SimMetrics {
        tdr,
        fdr,
        nvar: selected.len(),
        rsee,
        cve: f64::NAN,
        mspe,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    /// The batch-structured generator alone.
    Appendix,
    /// Generator X standing in for real structured data, with an
    /// independently injected confounder driving the outcome.
    SemiSynthetic,
}

/// Benchmark scenario, loadable from JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub generator: GeneratorKind,
    pub n: usize,
    pub p: usize,
    pub s: usize,
    pub beta: f64,
    pub gamma: f64,
    /// Batch count of the generated design.
    pub b: usize,
    /// Confounder levels for the semi-synthetic generator.
    pub inject_b: usize,
    pub k: usize,
    pub strategies: Vec<CvStrategy>,
    pub n_reps: usize,
    pub base_seed: u64,
    /// Fraction of rows held out as an external test set (0 disables).
    pub holdout_fraction: f64,
    /// Run the full strategy twice, with consistent and with whole-data
    /// covariance scaling, instead of the strategy list.
    pub compare_blup_modes: bool,
    pub eta: Option<f64>,
    pub n_lambda: usize,
    pub min_ratio: Option<f64>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            generator: GeneratorKind::Appendix,
            n: 100,
            p: 256,
            s: 4,
            beta: 2.0,
            gamma: 6.0,
            b: 20,
            inject_b: 5,
            k: 5,
            strategies: vec![CvStrategy::Full],
            n_reps: 10,
            base_seed: 1,
            holdout_fraction: 0.0,
            compare_blup_modes: false,
            eta: None,
            n_lambda: 100,
            min_ratio: None,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_reps == 0 {
            return Err(PlmmError::Config("n_reps must be >= 1".into()));
        }
        if self.k < 2 {
            return Err(PlmmError::Config("k must be >= 2".into()));
        }
        if !(0.0..0.9).contains(&self.holdout_fraction) {
            return Err(PlmmError::Config(
                "holdout_fraction must lie in [0, 0.9)".into(),
            ));
        }
        if self.b == 0 || self.n % self.b != 0 {
            return Err(PlmmError::Config(format!(
                "b must divide n: n={}, b={}",
                self.n, self.b
            )));
        }
        if self.s > self.p {
            return Err(PlmmError::Config(format!(
                "s must not exceed p: s={}, p={}",
                self.s, self.p
            )));
        }
        if !self.compare_blup_modes && self.strategies.is_empty() {
            return Err(PlmmError::Config("strategies must be nonempty".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<ScenarioConfig> {
        let config: ScenarioConfig =
            serde_json::from_str(text).map_err(|e| PlmmError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    fn fit_options(&self) -> FitOptions {
        FitOptions {
            eta_override: self.eta,
            n_lambda: self.n_lambda,
            min_ratio: self.min_ratio,
            ..FitOptions::default()
        }
    }
}

/// One benchmark run: a replicate evaluated under one strategy label.
#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub rep: usize,
    pub seed: u64,
    pub strategy: String,
    pub lambda_min: f64,
    pub lambda_1se: f64,
    pub nvar_at_min: usize,
    pub nvar_at_1se: usize,
    pub metrics: SimMetrics,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SummaryStat {
    pub mean: f64,
    pub sd: f64,
    pub median: f64,
}

pub(crate) fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

fn summarize(values: &[f64]) -> SummaryStat {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut copy = values.to_vec();
    SummaryStat {
        mean,
        sd,
        median: median(&mut copy),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkOutput {
    pub rows: Vec<BenchRow>,
    /// strategy -> metric -> mean/sd/median over replicates.
    pub summary: BTreeMap<String, BTreeMap<String, SummaryStat>>,
}

impl BenchmarkOutput {
    fn build_summary(rows: &[BenchRow], with_holdout: bool) -> BTreeMap<String, BTreeMap<String, SummaryStat>> {
        let mut by_strategy: BTreeMap<String, Vec<&BenchRow>> = BTreeMap::new();
        for row in rows {
            by_strategy.entry(row.strategy.clone()).or_default().push(row);
        }
        let mut summary = BTreeMap::new();
        for (strategy, rows) in by_strategy {
            let mut metrics: BTreeMap<String, SummaryStat> = BTreeMap::new();
            let collect = |f: &dyn Fn(&BenchRow) -> f64| -> Vec<f64> {
                rows.iter().map(|r| f(r)).collect()
            };
            metrics.insert("tdr".into(), summarize(&collect(&|r| r.metrics.tdr)));
            metrics.insert("fdr".into(), summarize(&collect(&|r| r.metrics.fdr)));
            metrics.insert(
                "nvar".into(),
                summarize(&collect(&|r| r.metrics.nvar as f64)),
            );
            metrics.insert("rsee".into(), summarize(&collect(&|r| r.metrics.rsee)));
            metrics.insert("cve".into(), summarize(&collect(&|r| r.metrics.cve)));
            if with_holdout {
                metrics.insert("mspe".into(), summarize(&collect(&|r| r.metrics.mspe)));
                metrics.insert(
                    "calibration_ratio".into(),
                    summarize(&collect(&|r| {
                        (r.metrics.cve - r.metrics.mspe).abs() / r.metrics.mspe
                    })),
                );
            }
            summary.insert(strategy, metrics);
        }
        summary
    }
}

fn generate_for_scenario(config: &ScenarioConfig, seed: u64) -> Result<SimDataset> {
    match config.generator {
        GeneratorKind::Appendix => generate_correlated_data(
            &GeneratorParams {
                n: config.n,
                p: config.p,
                s: config.s,
                gamma: config.gamma,
                beta: config.beta,
                b: config.b,
            },
            seed,
        ),
        GeneratorKind::SemiSynthetic => {
            // structured design from the generator, outcome from an
            // independently injected confounder
            let base = generate_correlated_data(
                &GeneratorParams {
                    n: config.n,
                    p: config.p,
                    s: 0,
                    gamma: 0.0,
                    beta: 0.0,
                    b: config.b,
                },
                seed,
            )?;
            inject_confounder(
                base.x.view(),
                config.inject_b,
                config.gamma,
                config.beta,
                config.s,
                derive_seed(seed, 0xA),
            )
        }
    }
}

fn run_replicate(config: &ScenarioConfig, rep: usize) -> Result<Vec<BenchRow>> {
    let seed = config.base_seed + rep as u64;
    let sim = generate_for_scenario(config, seed)?;
    let n = sim.n();

    // deterministic holdout split
    let n_holdout = (config.holdout_fraction * n as f64).round() as usize;
    let (train_rows, test_rows) = if n_holdout > 0 {
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = seeded(derive_seed(seed, 0xB));
        order.shuffle(&mut rng);
        let mut test: Vec<usize> = order[..n_holdout].to_vec();
        let mut train: Vec<usize> = order[n_holdout..].to_vec();
        test.sort_unstable();
        train.sort_unstable();
        (train, test)
    } else {
        ((0..n).collect(), Vec::new())
    };

    let x_train = sim.x.select(Axis(0), &train_rows);
    let y_train = sim.y.select(Axis(0), &train_rows);
    let train_data = Dataset::new(
        x_train,
        y_train,
        (1..=sim.p()).map(|j| format!("x{j}")).collect(),
        train_rows.iter().map(|i| (i + 1).to_string()).collect(),
        "y".into(),
    )?;

    let fold_seed = derive_seed(seed, 0xC);
    let folds = assign_folds(train_data.n(), config.k, fold_seed)?;

    let runs: Vec<(String, CvStrategy, BlupModeOption)> = if config.compare_blup_modes {
        vec![
            (
                "full_correct_blup".into(),
                CvStrategy::Full,
                BlupModeOption::Correct,
            ),
            (
                "full_incorrect_blup".into(),
                CvStrategy::Full,
                BlupModeOption::Incorrect,
            ),
        ]
    } else {
        config
            .strategies
            .iter()
            .map(|&s| (s.name().to_string(), s, BlupModeOption::Correct))
            .collect()
    };

    let base_options = CvOptions {
        fit: config.fit_options(),
        blup_mode: BlupModeOption::Correct,
    };
    let context = prepare_cv_context(&train_data, &base_options)?;
    let reference = &context.reference.model;

    let mut rows = Vec::with_capacity(runs.len());
    for (label, strategy, blup_mode) in runs {
        let options = CvOptions {
            fit: config.fit_options(),
            blup_mode,
        };
        let cv = cross_validate_with_context(&train_data, &folds, strategy, &options, &context)?;
        let idx = cv.min_index;
        let beta_hat = reference.beta_path.column(idx);
        let (y_test_view, y_hat) = if test_rows.is_empty() {
            (None, None)
        } else {
            let x_test = sim.x.select(Axis(0), &test_rows);
            let y_hat = predict_blup(reference, x_test.view(), idx, BlupMode::Correct, None)?;
            (Some(sim.y.select(Axis(0), &test_rows)), Some(y_hat))
        };
        let mut metrics = compute_metrics(
            beta_hat,
            sim.beta_true.view(),
            y_test_view.as_ref().map(|v| v.view()),
            y_hat.as_ref().map(|v| v.view()),
        )?;
        metrics.cve = cv.cve[idx];
        rows.push(BenchRow {
            rep,
            seed,
            strategy: label,
            lambda_min: cv.lambda_min,
            lambda_1se: cv.lambda_1se,
            nvar_at_min: cv.nvar_at_min,
            nvar_at_1se: cv.nvar_at_1se,
            metrics,
        });
    }
    Ok(rows)
}

/// Run every replicate of a scenario and summarize per strategy.
pub fn run_benchmark(config: &ScenarioConfig) -> Result<BenchmarkOutput> {
    config.validate()?;
    let results: Vec<Result<Vec<BenchRow>>> = (0..config.n_reps)
        .into_par_iter()
        .map(|rep| run_replicate(config, rep).map_err(|e| e.in_replicate(rep)))
        .collect();
    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    let summary = BenchmarkOutput::build_summary(&rows, config.holdout_fraction > 0.0);
    Ok(BenchmarkOutput { rows, summary })
}
