//! Domain types shared by every stage of the screening pipeline.
//!
//! Everything here is a plain value type: once built it is never mutated in
//! place, so it can be shared freely between threads. All types encode to JSON
//! with snake_case field names; the same encoding is used by the HTTP API and
//! by the on-disk session store.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::screening::{self, ResourceEntry};

/// One of the six guided recording tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Speech,
    FaceDisgust,
    FaceSmile,
    FaceSurprise,
    MotorLeft,
    MotorRight,
}

impl TaskKind {
    pub const ALL: [TaskKind; 6] = [
        TaskKind::Speech,
        TaskKind::FaceDisgust,
        TaskKind::FaceSmile,
        TaskKind::FaceSurprise,
        TaskKind::MotorLeft,
        TaskKind::MotorRight,
    ];

    pub const FACE: [TaskKind; 3] = [TaskKind::FaceDisgust, TaskKind::FaceSmile, TaskKind::FaceSurprise];

    pub const MOTOR: [TaskKind; 2] = [TaskKind::MotorLeft, TaskKind::MotorRight];

    /// Stable identifier used in file names and API paths.
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Speech => "speech",
            TaskKind::FaceDisgust => "face_disgust",
            TaskKind::FaceSmile => "face_smile",
            TaskKind::FaceSurprise => "face_surprise",
            TaskKind::MotorLeft => "motor_left",
            TaskKind::MotorRight => "motor_right",
        }
    }

    pub fn modality(self) -> Modality {
        match self {
            TaskKind::Speech => Modality::Speech,
            TaskKind::FaceDisgust | TaskKind::FaceSmile | TaskKind::FaceSurprise => Modality::Face,
            TaskKind::MotorLeft | TaskKind::MotorRight => Modality::Motor,
        }
    }

    /// File extension of the artifact this task expects.
    pub fn artifact_extension(self) -> &'static str {
        match self {
            TaskKind::Speech => "wav",
            _ => "ljsonl",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown task name {0:?}")]
pub struct UnknownTask(pub String);

impl FromStr for TaskKind {
    type Err = UnknownTask;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TaskKind::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| UnknownTask(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Speech,
    Face,
    Motor,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Speech, Modality::Face, Modality::Motor];

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Speech => "speech",
            Modality::Face => "face",
            Modality::Motor => "motor",
        }
    }

    /// Inclusive range of a valid raw score for this modality.
    pub fn score_range(self) -> (f64, f64) {
        match self {
            Modality::Speech | Modality::Face => (0.0, 1.0),
            Modality::Motor => (0.0, 4.0),
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Modality {
    type Err = UnknownTask;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Modality::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| UnknownTask(s.to_string()))
    }
}

/// Opaque session identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SessionId(String);

impl SessionId {
    pub fn generate() -> Self {
        SessionId(uuid::Uuid::new_v4().simple().to_string())
    }

    /// Accepts only ids that are safe to use as a single path component.
    pub fn parse(s: &str) -> Option<Self> {
        let ok = !s.is_empty()
            && s.len() <= 64
            && s.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_');
        ok.then(|| SessionId(s.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SessionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Collecting,
    Analyzing,
    Complete,
    Failed,
}

/// One screening session as persisted in `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionManifest {
    pub session_id: SessionId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub participant: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region_code: Option<String>,
    pub created_at: DateTime<Utc>,
    /// Last time an artifact was added or replaced.
    pub updated_at: DateTime<Utc>,
    /// Task → artifact reference (file name relative to the session directory).
    pub artifacts: BTreeMap<TaskKind, String>,
    pub status: SessionStatus,
}

impl SessionManifest {
    pub fn new(session_id: SessionId, created_at: DateTime<Utc>) -> Self {
        SessionManifest {
            session_id,
            participant: None,
            region_code: None,
            created_at,
            updated_at: created_at,
            artifacts: BTreeMap::new(),
            status: SessionStatus::Collecting,
        }
    }

    pub fn is_full(&self) -> bool {
        TaskKind::ALL.iter().all(|t| self.artifacts.contains_key(t))
    }
}

/// A session can be analyzed once it holds at least one artifact and has not
/// been analyzed yet.
pub fn session_ready_for_analysis(m: &SessionManifest) -> bool {
    !m.artifacts.is_empty() && m.status == SessionStatus::Collecting
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FeatureVectorError {
    #[error("feature vector has {names} names but {values} values")]
    LengthMismatch { names: usize, values: usize },
    #[error("feature {0:?} is not finite")]
    NonFiniteValue(String),
    #[error("feature vector has an empty schema")]
    EmptySchema,
}

/// Ordered, named feature values for one modality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub schema_id: String,
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

impl FeatureVector {
    /// Builds and validates a vector.
    pub fn new(
        schema_id: impl Into<String>,
        names: Vec<String>,
        values: Vec<f64>,
    ) -> Result<Self, FeatureVectorError> {
        let fv = FeatureVector { schema_id: schema_id.into(), names, values };
        validate_feature_vector(&fv)?;
        Ok(fv)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }

    /// Single-row CSV with a header line.
    pub fn to_csv(&self) -> String {
        format!(
            "{}\n{}\n",
            self.names.join(","),
            self.values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
        )
    }
}

pub fn validate_feature_vector(fv: &FeatureVector) -> Result<(), FeatureVectorError> {
    if fv.schema_id.is_empty() || fv.names.is_empty() {
        return Err(FeatureVectorError::EmptySchema);
    }
    if fv.names.len() != fv.values.len() {
        return Err(FeatureVectorError::LengthMismatch {
            names: fv.names.len(),
            values: fv.values.len(),
        });
    }
    if let Some((name, _)) = fv.names.iter().zip(&fv.values).find(|(_, v)| !v.is_finite()) {
        return Err(FeatureVectorError::NonFiniteValue(name.clone()));
    }
    Ok(())
}

/// Five-point severity scale, aligned with the 0–4 clinical item scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    None,
    Slight,
    Mild,
    Moderate,
    Severe,
}

impl Severity {
    pub fn from_level(level: u8) -> Severity {
        match level {
            0 => Severity::None,
            1 => Severity::Slight,
            2 => Severity::Mild,
            3 => Severity::Moderate,
            _ => Severity::Severe,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Severity::None => "none",
            Severity::Slight => "slight",
            Severity::Mild => "mild",
            Severity::Moderate => "moderate",
            Severity::Severe => "severe",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModalityScore {
    pub modality: Modality,
    /// Probability for speech and face, predicted severity (0–4) for motor.
    pub raw_score: f64,
    pub severity_bucket: Severity,
}

impl ModalityScore {
    pub fn new(modality: Modality, raw_score: f64) -> Result<Self, screening::ScreeningError> {
        let severity_bucket = screening::severity_bucket(modality, raw_score)?;
        Ok(ModalityScore { modality, raw_score, severity_bucket })
    }
}

/// A task that was present but could not be scored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisIssue {
    pub task: TaskKind,
    pub detail: String,
}

/// The participant-facing result of one session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub session_id: SessionId,
    /// Absent when no modality could be scored.
    pub overall_likelihood: Option<f64>,
    pub modality_scores: Vec<ModalityScore>,
    pub not_assessed: Vec<Modality>,
    #[serde(default)]
    pub issues: Vec<AnalysisIssue>,
    pub resources: Vec<ResourceEntry>,
    pub disclaimer: String,
    pub generated_at: DateTime<Utc>,
}
