//! Lasso-penalized linear mixed models on whitened data, with
//! cross-validation that repeats every preprocessing step inside each fold,
//! covariance-corrected prediction, and a simulation harness for comparing
//! fold strategies.

pub mod blup;
pub mod cli;
pub mod cv;
pub mod data;
pub mod decomposition;
pub mod error;
pub mod io;
pub mod lasso;
pub mod pipeline;
pub mod random;
pub mod rotation;
pub mod sim;
pub mod variance;

pub use blup::{blup_components, predict_blup, predict_blup_path, BlupMode, FullDataContext};
pub use cv::{
    assign_folds, cross_validate, cross_validate_strategies, cross_validate_with_folds,
    select_lambda, CvOptions, CvResult, CvStrategy, FoldAssignment,
};
pub use data::{
    apply_standardization, load_dataset, save_dataset, standardize, Dataset, StandardizedMatrix,
    DEFAULT_VARIANCE_THRESHOLD,
};
pub use decomposition::{
    build_preconditioner, compute_kinship, eigendecompose, Kinship, Preconditioner, Spectrum,
    ETA_MAX,
};
pub use error::{PlmmError, Result};
pub use lasso::{
    fit_path, make_lambda_path, predict_linear, CdSettings, LambdaPath, PlmmModel,
};
pub use pipeline::{fit_dataset, fit_matrix, FitOptions, FitOutput};
pub use rotation::{rotate, RotatedData};
pub use sim::{
    compute_metrics, generate_correlated_data, inject_confounder, run_benchmark, GeneratorParams,
    ScenarioConfig, SimDataset, SimMetrics,
};
pub use variance::{estimate_eta, EtaEstimate, EtaOptions};
