//! Session analysis: artifacts → features → model scores → report.
//!
//! Modalities are isolated from each other. A task whose artifact cannot be
//! parsed or featurized becomes an [`AnalysisIssue`]; the rest of the session
//! is still scored.

use std::collections::BTreeMap;
use std::path::Path;

use park_core::ingest::{gap_fill, parse_track, parse_wav, track_kind_for, LandmarkTrack, DEFAULT_MAX_GAP_S};
use park_core::learners::{predict_gbdt, predict_svm_ensemble, LearnError, ModelBundle};
use park_core::model::AnalysisIssue;
use park_core::screening::{build_report, ReportContext, ResourceDirectory, GLOBAL_REGION};
use park_core::{face, motor, speech, Modality, ModalityScore, RiskReport, SessionManifest, SessionStatus, TaskKind};
use thiserror::Error;

use crate::store::{read_manifest, write_atomic, write_manifest, SessionStore, StoreError, REPORT_FILE};

#[derive(Debug, Error)]
pub enum AnalyzeError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("session has no artifacts to analyze")]
    NotReady,
}

#[derive(Debug, Error)]
pub enum SetupError {
    #[error("model bundle: {0}")]
    Bundle(#[from] LearnError),
    #[error("resource directory: {0}")]
    Resources(#[from] park_core::screening::ScreeningError),
}

/// Loaded models and resources; shared read-only by all requests.
#[derive(Debug, Clone)]
pub struct Analyzer {
    pub bundle: ModelBundle,
    pub ctx: ReportContext,
}

fn issue(task: TaskKind, detail: impl ToString) -> AnalysisIssue {
    AnalysisIssue { task, detail: detail.to_string() }
}

fn read_track(task: TaskKind, bytes: &[u8]) -> Result<LandmarkTrack, String> {
    let kind = track_kind_for(task).expect("track task");
    let text = std::str::from_utf8(bytes).map_err(|e| format!("not UTF-8: {e}"))?;
    let track = parse_track(text, kind).map_err(|e| e.to_string())?;
    Ok(gap_fill(&track, DEFAULT_MAX_GAP_S))
}

impl Analyzer {
    pub fn new(bundle: ModelBundle, directory: ResourceDirectory) -> Self {
        let ctx = ReportContext { weights: bundle.weights.clone(), directory };
        Analyzer { bundle, ctx }
    }

    pub fn load(bundle: &Path, resources: &Path) -> Result<Self, SetupError> {
        let b = park_core::learners::load_bundle(bundle)?;
        let dir = ResourceDirectory::load(resources)?;
        Ok(Analyzer::new(b, dir))
    }

    fn score_speech(&self, bytes: &[u8]) -> Result<f64, String> {
        let model = self.bundle.speech.as_ref().ok_or("no speech model loaded")?;
        let clip = parse_wav(bytes).map_err(|e| e.to_string())?;
        let fv = speech::extract_speech_features(&clip).map_err(|e| e.to_string())?;
        predict_gbdt(model, &fv).map_err(|e| e.to_string())
    }

    fn score_face(&self, artifacts: &BTreeMap<TaskKind, Vec<u8>>, issues: &mut Vec<AnalysisIssue>) -> Option<f64> {
        let present: Vec<TaskKind> = TaskKind::FACE.into_iter().filter(|t| artifacts.contains_key(t)).collect();
        if present.is_empty() {
            return None;
        }
        let Some(model) = self.bundle.face.as_ref() else {
            issues.extend(present.iter().map(|&t| issue(t, "no face model loaded")));
            return None;
        };
        let mut blocks = Vec::new();
        for task in present.iter().copied() {
            match read_track(task, &artifacts[&task])
                .and_then(|tr| face::extract_expression_features(task, &tr).map_err(|e| e.to_string()))
            {
                Ok(b) => blocks.push(b),
                Err(e) => issues.push(issue(task, e)),
            }
        }
        // missing expressions are imputed (zeros, present = 0) by combine
        if blocks.is_empty() {
            return None;
        }
        let scored = face::combine_expression_features(&blocks)
            .map_err(|e| e.to_string())
            .and_then(|fv| predict_svm_ensemble(model, &fv).map_err(|e| e.to_string()));
        match scored {
            Ok(p) => Some(p),
            Err(e) => {
                issues.push(issue(present[0], e));
                None
            }
        }
    }

    fn score_hand(&self, task: TaskKind, bytes: &[u8]) -> Result<f64, String> {
        let model = self.bundle.motor.as_ref().ok_or("no motor model loaded")?;
        let track = read_track(task, bytes)?;
        let fv = motor::aperture(&track)
            .and_then(|sig| motor::extract_motor_features(&sig))
            .map_err(|e| e.to_string())?;
        let (lo, hi) = Modality::Motor.score_range();
        Ok(predict_gbdt(model, &fv).map_err(|e| e.to_string())?.clamp(lo, hi))
    }

    /// Scores whatever artifacts are present.
    pub fn score(&self, artifacts: &BTreeMap<TaskKind, Vec<u8>>) -> (Vec<ModalityScore>, Vec<AnalysisIssue>) {
        let mut scores = Vec::new();
        let mut issues = Vec::new();
        let mut push = |m: Modality, raw: f64, task: TaskKind, issues: &mut Vec<AnalysisIssue>| {
            match ModalityScore::new(m, raw) {
                Ok(s) => scores.push(s),
                Err(e) => issues.push(issue(task, e)),
            }
        };
        if let Some(bytes) = artifacts.get(&TaskKind::Speech) {
            match self.score_speech(bytes) {
                Ok(p) => push(Modality::Speech, p, TaskKind::Speech, &mut issues),
                Err(e) => issues.push(issue(TaskKind::Speech, e)),
            }
        }
        if let Some(p) = self.score_face(artifacts, &mut issues) {
            push(Modality::Face, p, TaskKind::FaceDisgust, &mut issues);
        }
        // the worse hand decides
        let mut worst: Option<(f64, TaskKind)> = None;
        for task in TaskKind::MOTOR {
            let Some(bytes) = artifacts.get(&task) else { continue };
            match self.score_hand(task, bytes) {
                Ok(s) if worst.is_none_or(|(w, _)| s > w) => worst = Some((s, task)),
                Ok(_) => {}
                Err(e) => issues.push(issue(task, e)),
            }
        }
        if let Some((s, task)) = worst {
            push(Modality::Motor, s, task, &mut issues);
        }
        (scores, issues)
    }

    pub fn report(&self, manifest: &SessionManifest, artifacts: &BTreeMap<TaskKind, Vec<u8>>) -> RiskReport {
        let (scores, issues) = self.score(artifacts);
        let region = manifest.region_code.as_deref().unwrap_or(GLOBAL_REGION);
        build_report(&manifest.session_id, &scores, issues, region, &self.ctx, manifest.updated_at)
    }

    /// Analyzes the session stored in `dir`, or returns its stored report.
    /// The caller must hold the session lock when other writers exist.
    pub fn analyze_dir(&self, dir: &Path) -> Result<Vec<u8>, AnalyzeError> {
        let mut m = read_manifest(dir)?;
        let report_path = dir.join(REPORT_FILE);
        if matches!(m.status, SessionStatus::Complete | SessionStatus::Failed) {
            return std::fs::read(&report_path).map_err(|e| StoreError::Corrupt(format!("missing report: {e}")).into());
        }
        // Analyzing here means an earlier run died midway; just redo it.
        if m.artifacts.is_empty() {
            return Err(AnalyzeError::NotReady);
        }
        if m.status != SessionStatus::Analyzing {
            m.status = SessionStatus::Analyzing;
            write_manifest(dir, &m)?;
        }
        let mut artifacts = BTreeMap::new();
        for (task, name) in &m.artifacts {
            let bytes = std::fs::read(dir.join(name)).map_err(|e| StoreError::Corrupt(format!("{name}: {e}")))?;
            artifacts.insert(*task, bytes);
        }
        let report = self.report(&m, &artifacts);
        let bytes = report_bytes(&report);
        write_atomic(&report_path, &bytes).map_err(|e| StoreError::Unavailable(e.to_string()))?;
        m.status = if report.modality_scores.is_empty() { SessionStatus::Failed } else { SessionStatus::Complete };
        write_manifest(dir, &m)?;
        Ok(bytes)
    }
}

/// Canonical serialized form shared by the CLI and the HTTP API.
pub fn report_bytes(report: &RiskReport) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(report).expect("report serializes");
    out.push(b'\n');
    out
}

impl SessionStore {
    pub fn analyze(&self, id: &park_core::SessionId, analyzer: &Analyzer) -> Result<Vec<u8>, AnalyzeError> {
        self.with_lock(id, || {
            self.manifest(id)?;
            analyzer.analyze_dir(&self.session_dir(id))
        })
    }
}
