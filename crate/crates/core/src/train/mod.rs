//! Metrics, per-fold training and k-fold cross-validation.

mod config;
mod cv;
mod evaluate;
mod fold;
pub mod metrics;
mod model_file;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{DatasetError, FoldError};
use crate::nn::NnError;
use crate::optim::OptimError;

pub use config::TrainConfig;
pub use cv::{
    cross_validate, fold_log_path, fold_model_path, read_log, read_report, reference_scores,
    regenerate_report, write_run, write_run_to, CvReport, CvRun, ReferenceScore,
};
pub use evaluate::{evaluate, Evaluation};
pub use fold::{eval_loss, train_fold, ClipPrediction, EpochLog, FoldOutcome, TrainingLog};
pub use metrics::{accuracy, macro_f1, ConfusionMatrix, MetricError};
pub use model_file::{
    argmax, load_model, load_model_expecting, model_from_json, model_id, model_to_json,
    save_model, Classifier, ModelFileError, MODEL_FORMAT_VERSION,
};

/// Test-fold scores of one trained fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fold_index: usize,
    pub test_accuracy: f64,
    pub test_macro_f1: f64,
    pub best_epoch: usize,
    pub stop_epoch: usize,
    pub n_test: usize,
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Folds(#[from] FoldError),
    #[error("fold plan: {0}")]
    Plan(String),
    #[error("fold {fold}: empty {split} split")]
    EmptySplit { fold: usize, split: &'static str },
    #[error("fold {fold} diverged at epoch {epoch}: {detail}")]
    Diverged {
        fold: usize,
        epoch: usize,
        detail: String,
    },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    ModelFile(#[from] ModelFileError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("report: {0}")]
    Report(String),
}
