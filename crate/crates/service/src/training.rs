//! Per-modality training and evaluation glue used by the CLI.

use park_core::learners::{
    auc, face_member_subsets, kfold_indices, mae_pearson, train_gbdt, train_svm_ensemble, Dataset, EvalMetrics,
    GbdtParams, LearnError, ModelBundle, SvmParams, TaskType,
};
use park_core::synth::{self, SynthError};
use park_core::{face, motor, speech, Modality};

pub fn schema_id(m: Modality) -> &'static str {
    match m {
        Modality::Speech => speech::SCHEMA_ID,
        Modality::Face => face::SCHEMA_ID,
        Modality::Motor => motor::SCHEMA_ID,
    }
}

pub fn feature_names(m: Modality) -> Vec<String> {
    match m {
        Modality::Speech => speech::feature_names(&speech::SpeechConfig::default()),
        Modality::Face => face::feature_names(),
        Modality::Motor => motor::feature_names(),
    }
}

pub fn task_type(m: Modality) -> TaskType {
    match m {
        Modality::Motor => TaskType::Regression,
        _ => TaskType::BinaryClass,
    }
}

/// Reads a training CSV and checks its header against the modality schema.
pub fn load_dataset(m: Modality, path: &std::path::Path) -> Result<Dataset, LearnError> {
    let data = Dataset::load_csv(path, schema_id(m), task_type(m))?;
    check_names(m, &data)?;
    Ok(data)
}

fn check_names(m: Modality, data: &Dataset) -> Result<(), LearnError> {
    let expected = feature_names(m);
    if data.names != expected {
        return Err(LearnError::SchemaMismatch {
            expected: format!("{} ({} features)", schema_id(m), expected.len()),
            found: format!("header with {} features", data.names.len()),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    pub gbdt: GbdtParams,
    pub svm: SvmParams,
}

/// Trains the modality's model and stores it in its bundle slot.
pub fn train_into(bundle: &mut ModelBundle, m: Modality, data: &Dataset, opts: &TrainOptions) -> Result<(), LearnError> {
    check_names(m, data)?;
    match m {
        Modality::Speech => bundle.speech = Some(train_gbdt(data, &opts.gbdt)?),
        Modality::Motor => bundle.motor = Some(train_gbdt(data, &opts.gbdt)?),
        Modality::Face => bundle.face = Some(train_svm_ensemble(data, &face_member_subsets(), &opts.svm)?),
    }
    Ok(())
}

/// Model outputs (probability or severity) for every row.
pub fn predict_rows(bundle: &ModelBundle, m: Modality, data: &Dataset) -> Result<Vec<f64>, LearnError> {
    let missing = || LearnError::InvalidParams(format!("bundle has no {m} model"));
    let (schema, n, f): (&str, usize, Box<dyn Fn(&[f64]) -> f64 + '_>) = match m {
        Modality::Speech | Modality::Motor => {
            let g = if m == Modality::Speech { bundle.speech.as_ref() } else { bundle.motor.as_ref() };
            let g = g.ok_or_else(missing)?;
            (&g.schema_id, g.n_features, Box::new(|x| g.predict_values(x)))
        }
        Modality::Face => {
            let e = bundle.face.as_ref().ok_or_else(missing)?;
            (&e.schema_id, e.n_features, Box::new(|x| e.predict_values(x)))
        }
    };
    if schema != data.schema_id || n != data.n_features() {
        return Err(LearnError::SchemaMismatch {
            expected: format!("{schema} ({n} features)"),
            found: format!("{} ({} features)", data.schema_id, data.n_features()),
        });
    }
    Ok(data.rows.iter().map(|r| f(r)).collect())
}

pub fn metrics(task: TaskType, preds: &[f64], labels: &[f64]) -> Result<EvalMetrics, LearnError> {
    Ok(match task {
        TaskType::BinaryClass => EvalMetrics { auc: Some(auc(preds, labels)?), mae: None, pearson_r: None },
        TaskType::Regression => {
            let (mae, r) = mae_pearson(preds, labels)?;
            EvalMetrics { auc: None, mae: Some(mae), pearson_r: Some(r) }
        }
    })
}

pub fn evaluate(bundle: &ModelBundle, m: Modality, data: &Dataset) -> Result<EvalMetrics, LearnError> {
    metrics(data.task, &predict_rows(bundle, m, data)?, &data.labels)
}

/// Pooled out-of-fold metrics from k-fold cross-validation.
pub fn cross_validate(m: Modality, data: &Dataset, k: usize, seed: u64, opts: &TrainOptions) -> Result<EvalMetrics, LearnError> {
    let mut preds = vec![0.0; data.len()];
    for (train_idx, test_idx) in kfold_indices(data.len(), k, seed)? {
        let mut b = ModelBundle::default();
        train_into(&mut b, m, &data.subset(&train_idx), opts)?;
        let held = data.subset(&test_idx);
        for (i, p) in test_idx.iter().zip(predict_rows(&b, m, &held)?) {
            preds[*i] = p;
        }
    }
    metrics(data.task, &preds, &data.labels)
}

pub fn synthetic_cohort(m: Modality, n: usize, seed: u64) -> Result<Dataset, SynthError> {
    match m {
        Modality::Speech => synth::speech_cohort(n, seed),
        Modality::Face => synth::face_cohort(n, seed),
        Modality::Motor => synth::motor_cohort(n, seed),
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BundleBuildError {
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Learn(#[from] LearnError),
}

/// A complete bundle trained on synthetic cohorts of `n` participants.
pub fn synthetic_bundle(n: usize, seed: u64) -> Result<ModelBundle, BundleBuildError> {
    let mut b = ModelBundle::default();
    for (i, m) in Modality::ALL.into_iter().enumerate() {
        let data = synthetic_cohort(m, n, seed.wrapping_add(i as u64))?;
        train_into(&mut b, m, &data, &TrainOptions::default())?;
    }
    Ok(b)
}
