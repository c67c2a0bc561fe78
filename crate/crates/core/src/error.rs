//! Error type shared across the crate.
//!
//! Errors are split into two families for the CLI exit-code contract:
//! validation/usage problems (exit 2) and numerical failures (exit 3).

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, PlmmError>;

#[derive(Debug, Error)]
pub enum PlmmError {
    #[error("failed to access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: row {row}, column '{column}': cannot parse '{value}' as a finite number")]
    NonNumericCell {
        path: PathBuf,
        row: usize,
        column: String,
        value: String,
    },

    #[error("outcome column '{0}' not found in header")]
    MissingOutcome(String),

    #[error("duplicate feature name '{0}'")]
    DuplicateFeature(String),

    #[error("dataset must have at least 2 rows, found {0}")]
    TooFewRows(usize),

    #[error("dataset must have at least 1 feature column")]
    NoFeatures,

    #[error("non-finite value at row '{row}', column '{column}'")]
    NonFiniteCell { row: String, column: String },

    #[error("column mismatch: missing {missing:?}, unexpected {extra:?}")]
    ColumnMismatch {
        missing: Vec<String>,
        extra: Vec<String>,
    },

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("outcome vector is not centered (relative |mean| = {0:.3e})")]
    NotCentered(f64),

    #[error("outcome vector has no variance to attribute")]
    DegenerateOutcome,

    #[error("no active features remain after variance screening")]
    NoActiveFeatures,

    #[error("lambda_max is zero: outcome is orthogonal to every active feature")]
    DegeneratePath,

    #[error("eigendecomposition failed: {0}")]
    EigenFailure(String),

    #[error("kinship eigenvalue {0:.3e} is more negative than the roundoff clamp allows")]
    NegativeEigenvalue(f64),

    #[error("coordinate descent did not converge at lambda = {lambda:.6e} after {max_sweeps} sweeps")]
    NonConvergence { lambda: f64, max_sweeps: usize },

    #[error("spectrum cache hash mismatch: expected {expected}, found {found}")]
    HashMismatch { expected: String, found: String },

    #[error("fold {fold}: training split has {n_train} rows; at least 2 are required")]
    FoldTooSmall { fold: usize, n_train: usize },

    #[error("lambda index {index} out of range for a path of {len} values")]
    LambdaIndexOutOfRange { index: usize, len: usize },

    #[error("invalid scenario config: {0}")]
    Config(String),

    #[error("malformed file {path}: {message}")]
    MalformedFile { path: PathBuf, message: String },

    #[error("fold {fold} ({strategy}): {source}")]
    InFold {
        fold: usize,
        strategy: &'static str,
        #[source]
        source: Box<PlmmError>,
    },

    #[error("replicate {rep}: {source}")]
    InReplicate {
        rep: usize,
        #[source]
        source: Box<PlmmError>,
    },
}

impl PlmmError {
    /// Short machine-readable tag for the error JSON emitted by the CLI.
    pub fn kind(&self) -> &'static str {
        use PlmmError::*;
        match self {
            Io { .. } => "io",
            NonNumericCell { .. } | NonFiniteCell { .. } => "parse",
            MissingOutcome(_) => "missing_column",
            DuplicateFeature(_) => "duplicate_column",
            TooFewRows(_) | NoFeatures => "empty_data",
            ColumnMismatch { .. } => "column_mismatch",
            DimensionMismatch { .. } => "dimension_mismatch",
            InvalidArgument(_) => "invalid_argument",
            NotCentered(_) => "not_centered",
            DegenerateOutcome => "degenerate_outcome",
            NoActiveFeatures => "no_active_features",
            DegeneratePath => "degenerate_path",
            EigenFailure(_) => "eigen_failure",
            NegativeEigenvalue(_) => "negative_eigenvalue",
            NonConvergence { .. } => "non_convergence",
            HashMismatch { .. } => "hash_mismatch",
            FoldTooSmall { .. } => "fold_too_small",
            LambdaIndexOutOfRange { .. } => "lambda_index",
            Config(_) => "config",
            MalformedFile { .. } => "malformed_file",
            InFold { source, .. } | InReplicate { source, .. } => source.kind(),
        }
    }

    /// Exit-code contract: 0 success, 2 usage/validation, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        use PlmmError::*;
        match self {
            DegenerateOutcome | DegeneratePath | EigenFailure(_) | NegativeEigenvalue(_)
            | NonConvergence { .. } => 3,
            InFold { source, .. } | InReplicate { source, .. } => source.exit_code(),
            _ => 2,
        }
    }

    pub fn in_fold(self, fold: usize, strategy: &'static str) -> Self {
        PlmmError::InFold {
            fold,
            strategy,
            source: Box::new(self),
        }
    }

    pub fn in_replicate(self, rep: usize) -> Self {
        PlmmError::InReplicate {
            rep,
            source: Box::new(self),
        }
    }
}
