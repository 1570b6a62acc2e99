//! Screening pipeline for remote Parkinson's disease assessment tasks.
//!
//! Recordings of six guided tasks (a spoken pangram, three facial
//! expressions, finger tapping with each hand) go in; per-modality feature
//! vectors, model scores and a plain-language [`RiskReport`] come out.
//!
//! * [`ingest`] reads WAV audio and `.ljsonl` landmark tracks.
//! * [`speech`], [`face`] and [`motor`] compute the `speech.v1`, `face.v1` and
//!   `motor.v1` feature vectors.
//! * [`learners`] trains and applies gradient-boosted trees and SVM ensembles,
//!   and holds the evaluation metrics.
//! * [`screening`] aggregates scores into a report.
//! * [`synth`] generates synthetic recordings and cohorts with known effects.

pub mod face;
pub mod ingest;
pub mod learners;
pub mod model;
pub mod motor;
pub mod peaks;
pub mod screening;
pub mod speech;
pub mod synth;

pub use model::{
    FeatureVector, Modality, ModalityScore, RiskReport, SessionId, SessionManifest, SessionStatus, Severity, TaskKind,
};
