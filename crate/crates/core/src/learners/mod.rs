//! Gradient-boosted trees, SVM ensembles, evaluation metrics and the model
//! bundle format.

use thiserror::Error;

pub mod bundle;
pub mod dataset;
pub mod gbdt;
pub mod metrics;
pub mod svm;

pub use bundle::{load_bundle, save_bundle, ModelBundle, FORMAT_VERSION};
pub use dataset::{Dataset, TaskType};
pub use gbdt::{predict_gbdt, train_gbdt, train_gbdt_traced, GbdtModel, GbdtParams, Node, Objective, Tree};
pub use metrics::{auc, kfold_indices, mae_pearson, EvalMetrics};
pub use svm::{
    face_member_subsets, predict_svm_ensemble, train_svm_ensemble, train_svm_smo, Svm, SvmEnsemble, SvmParams,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LearnError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("schema mismatch: expected {expected}, got {found}")]
    SchemaMismatch { expected: String, found: String },
    #[error("labels contain a single class")]
    DegenerateLabels,
    #[error("row {row}: invalid label {value}")]
    InvalidLabel { row: usize, value: f64 },
    #[error("row {row}: {detail}")]
    InvalidRow { row: usize, detail: String },
    #[error("both classes are required")]
    SingleClass,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("zero variance")]
    ZeroVariance,
    #[error("unknown bundle version {0:?}")]
    UnknownVersion(String),
    #[error("corrupt model: {0}")]
    CorruptModel(String),
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for LearnError {
    fn from(e: std::io::Error) -> Self {
        LearnError::Io(e.to_string())
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}
