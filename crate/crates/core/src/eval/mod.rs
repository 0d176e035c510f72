//! Data splitting, cross-validation, hyperparameter search and metrics.
//!
//! Precision, recall and F1 are macro-averaged (unweighted class means)
//! wherever a single figure is reported.

mod metrics;
mod search;
mod split;

use thiserror::Error;

pub use metrics::{
    confusion, confusion_from_indices, metrics, regression_metrics, roc, roc_one_vs_rest, ClassMetrics, ConfusionMatrix,
    MetricsReport, RegressionMetrics, RocCurve,
};
pub use search::{grid_search, random_search, ParamConfig, ParamValue, Sampler, SearchResult, SearchRow};
pub use split::{
    apportion, folds_to_pairs, kfold, split, stratified_kfold, DataSplit, Fold, SplitRatios, SPLIT_FORMAT,
    SPLIT_SCHEMA_VERSION,
};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("split ratios must be positive and sum to 1: {0}")]
    BadRatios(String),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("k must satisfy 2 <= k <= n (k = {k}, n = {n})")]
    BadK { k: usize, n: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("label {0:?} is not in the label order")]
    UnknownLabel(String),
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("both classes must be present")]
    SingleClass,
    #[error("score at position {0} is not finite")]
    NonFiniteScore(usize),
    #[error("no samples")]
    Empty,
    #[error("target is constant; r-squared is undefined")]
    ConstantTarget,
    #[error("search space is empty")]
    EmptySpace,
    #[error("invalid sampler for {name}: {reason}")]
    InvalidSampler { name: String, reason: String },
    #[error("trial {index} failed: {message}")]
    Trial { index: usize, message: String },
    #[error(transparent)]
    Format(#[from] crate::textfmt::FormatError),
}
