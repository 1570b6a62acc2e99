//! Turning per-modality model outputs into the participant-facing report.

use std::collections::BTreeSet;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{AnalysisIssue, Modality, ModalityScore, RiskReport, SessionId, Severity};

/// Shown with every report.
pub const DISCLAIMER: &str = "This is a screening aid for research and demonstration purposes. \
It is not a diagnosis and is not intended for clinical use. Only a qualified clinician, such as \
a neurologist, can diagnose Parkinson's disease. If you have concerns about your health, please \
talk to a doctor.";

/// Region code whose entries apply everywhere.
pub const GLOBAL_REGION: &str = "GLOBAL";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScreeningError {
    #[error("no modality scores to aggregate")]
    NoScores,
    #[error("{modality} score {value} is outside its valid range")]
    OutOfRange { modality: Modality, value: f64 },
    #[error("more than one {0} score")]
    DuplicateModality(Modality),
    #[error("invalid aggregator weights: {0}")]
    InvalidWeights(String),
    #[error("resource directory missing or empty: {0}")]
    DirectoryMissing(String),
    #[error("invalid resource directory: {0}")]
    InvalidDirectory(String),
}

/// Monotone piecewise-linear map given by its knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PiecewiseLinear {
    pub knots: Vec<(f64, f64)>,
}

impl PiecewiseLinear {
    /// Clamps to the end knots outside their range.
    pub fn eval(&self, x: f64) -> f64 {
        let k = &self.knots;
        if x <= k[0].0 {
            return k[0].1;
        }
        for w in k.windows(2) {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            if x <= x1 {
                return if x1 > x0 { y0 + (y1 - y0) * (x - x0) / (x1 - x0) } else { y1 };
            }
        }
        k[k.len() - 1].1
    }
}

/// Modality weights for the overall likelihood, plus the map that turns a
/// motor severity into a probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatorWeights {
    pub w_speech: f64,
    pub w_face: f64,
    pub w_motor: f64,
    pub motor_to_prob: PiecewiseLinear,
}

impl Default for AggregatorWeights {
    fn default() -> Self {
        AggregatorWeights {
            w_speech: 1.0 / 3.0,
            w_face: 1.0 / 3.0,
            w_motor: 1.0 / 3.0,
            motor_to_prob: PiecewiseLinear { knots: vec![(0.0, 0.0), (4.0, 1.0)] },
        }
    }
}

impl AggregatorWeights {
    pub fn validate(&self) -> Result<(), ScreeningError> {
        let w = [self.w_speech, self.w_face, self.w_motor];
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(ScreeningError::InvalidWeights(format!("negative or non-finite weight in {w:?}")));
        }
        if (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(ScreeningError::InvalidWeights(format!("weights {w:?} do not sum to 1")));
        }
        let k = &self.motor_to_prob.knots;
        if k.len() < 2 || k[0] != (0.0, 0.0) || k[k.len() - 1] != (4.0, 1.0) {
            return Err(ScreeningError::InvalidWeights("motor map must run from (0, 0) to (4, 1)".into()));
        }
        if k.windows(2).any(|p| !(p[1].0 >= p[0].0 && p[1].1 >= p[0].1)) {
            return Err(ScreeningError::InvalidWeights("motor map is not monotone".into()));
        }
        Ok(())
    }

    pub fn weight(&self, m: Modality) -> f64 {
        match m {
            Modality::Speech => self.w_speech,
            Modality::Face => self.w_face,
            Modality::Motor => self.w_motor,
        }
    }

    /// Probability-scale value of a modality score.
    pub fn probability(&self, s: &ModalityScore) -> f64 {
        match s.modality {
            Modality::Motor => self.motor_to_prob.eval(s.raw_score),
            _ => s.raw_score,
        }
    }
}

/// Weighted mean of the present modalities' probabilities, with the weights
/// renormalized over what is present.
pub fn aggregate(scores: &[ModalityScore], w: &AggregatorWeights) -> Result<f64, ScreeningError> {
    if scores.is_empty() {
        return Err(ScreeningError::NoScores);
    }
    let mut seen = BTreeSet::new();
    for s in scores {
        if !seen.insert(s.modality) {
            return Err(ScreeningError::DuplicateModality(s.modality));
        }
        let (lo, hi) = s.modality.score_range();
        if !(s.raw_score >= lo && s.raw_score <= hi) {
            return Err(ScreeningError::OutOfRange { modality: s.modality, value: s.raw_score });
        }
    }
    if let [only] = scores {
        return Ok(w.probability(only));
    }
    let total: f64 = scores.iter().map(|s| w.weight(s.modality)).sum();
    let value = if total > 0.0 {
        scores.iter().map(|s| w.weight(s.modality) * w.probability(s)).sum::<f64>() / total
    } else {
        scores.iter().map(|s| w.probability(s)).sum::<f64>() / scores.len() as f64
    };
    Ok(value.clamp(0.0, 1.0))
}

/// Probability modalities use half-open fifths of [0, 1]; motor severities
/// are rounded to the nearest integer level.
pub fn severity_bucket(modality: Modality, raw_score: f64) -> Result<Severity, ScreeningError> {
    let (lo, hi) = modality.score_range();
    if !(raw_score >= lo && raw_score <= hi) {
        return Err(ScreeningError::OutOfRange { modality, value: raw_score });
    }
    let level = match modality {
        Modality::Motor => raw_score.round() as u8,
        _ => ((raw_score * 5.0).floor() as u8).min(4),
    };
    Ok(Severity::from_level(level))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResourceKind {
    Neurologist,
    SupportGroup,
    Exercise,
    Diet,
    External,
}

impl ResourceKind {
    pub const ALL: [ResourceKind; 5] = [
        ResourceKind::Neurologist,
        ResourceKind::SupportGroup,
        ResourceKind::Exercise,
        ResourceKind::Diet,
        ResourceKind::External,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceEntry {
    pub kind: ResourceKind,
    pub title: String,
    /// `GLOBAL`, a country code (`US`) or a subdivision (`US-NY`).
    pub region_code: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contact: Option<String>,
}

/// Static list of care resources, loaded once.
#[derive(Debug, Clone, PartialEq)]
pub struct ResourceDirectory {
    entries: Vec<ResourceEntry>,
}

impl ResourceDirectory {
    pub fn new(entries: Vec<ResourceEntry>) -> Result<Self, ScreeningError> {
        if entries.is_empty() {
            return Err(ScreeningError::DirectoryMissing("directory has no entries".into()));
        }
        if let Some(e) = entries.iter().find(|e| e.title.trim().is_empty() || e.region_code.is_empty()) {
            return Err(ScreeningError::InvalidDirectory(format!("entry without title or region: {e:?}")));
        }
        Ok(ResourceDirectory { entries })
    }

    /// Parses a JSON array of entries.
    pub fn from_json(bytes: &[u8]) -> Result<Self, ScreeningError> {
        if bytes.iter().all(u8::is_ascii_whitespace) {
            return Err(ScreeningError::DirectoryMissing("file is empty".into()));
        }
        let entries: Vec<ResourceEntry> =
            serde_json::from_slice(bytes).map_err(|e| ScreeningError::InvalidDirectory(e.to_string()))?;
        ResourceDirectory::new(entries)
    }

    pub fn load(path: &Path) -> Result<Self, ScreeningError> {
        let bytes =
            std::fs::read(path).map_err(|e| ScreeningError::DirectoryMissing(format!("{}: {e}", path.display())))?;
        ResourceDirectory::from_json(&bytes)
    }

    pub fn entries(&self) -> &[ResourceEntry] {
        &self.entries
    }
}

/// For each requested kind: entries for the exact region, else for its
/// country, else global ones. Sorted by kind, then title.
pub fn find_resources(dir: &ResourceDirectory, region_code: &str, kinds: &[ResourceKind]) -> Vec<ResourceEntry> {
    let region = region_code.trim().to_ascii_uppercase();
    let country = region.split('-').next().unwrap_or_default().to_string();
    let kinds: BTreeSet<ResourceKind> = kinds.iter().copied().collect();
    let mut out = Vec::new();
    for kind in kinds {
        let of_kind = |code: &str| -> Vec<&ResourceEntry> {
            dir.entries.iter().filter(|e| e.kind == kind && e.region_code.eq_ignore_ascii_case(code)).collect()
        };
        let mut found = of_kind(&region);
        if found.is_empty() && country != region {
            found = of_kind(&country);
        }
        if found.is_empty() {
            found = of_kind(GLOBAL_REGION);
        }
        found.sort_by(|a, b| a.title.cmp(&b.title));
        out.extend(found.into_iter().cloned());
    }
    out
}

/// Everything needed to turn scores into a report.
#[derive(Debug, Clone)]
pub struct ReportContext {
    pub weights: AggregatorWeights,
    pub directory: ResourceDirectory,
}

fn resource_kinds(likelihood: Option<f64>, scores: &[ModalityScore]) -> Vec<ResourceKind> {
    let elevated =
        likelihood.is_some_and(|p| p >= 0.5) || scores.iter().any(|s| s.severity_bucket >= Severity::Mild);
    if elevated {
        ResourceKind::ALL.to_vec()
    } else {
        vec![ResourceKind::Exercise, ResourceKind::Diet, ResourceKind::External]
    }
}

/// Assembles the report. Never fails: with no scores the likelihood is
/// absent and every modality is listed as not assessed.
pub fn build_report(
    session_id: &SessionId,
    scores: &[ModalityScore],
    issues: Vec<AnalysisIssue>,
    region_code: &str,
    ctx: &ReportContext,
    generated_at: DateTime<Utc>,
) -> RiskReport {
    let mut modality_scores = scores.to_vec();
    modality_scores.sort_by_key(|s| s.modality);
    let overall_likelihood = aggregate(&modality_scores, &ctx.weights).ok();
    let not_assessed = Modality::ALL
        .into_iter()
        .filter(|m| !modality_scores.iter().any(|s| s.modality == *m))
        .collect();
    let resources = find_resources(&ctx.directory, region_code, &resource_kinds(overall_likelihood, &modality_scores));
    RiskReport {
        session_id: session_id.clone(),
        overall_likelihood,
        modality_scores,
        not_assessed,
        issues,
        resources,
        disclaimer: DISCLAIMER.to_string(),
        generated_at,
    }
}

// Placeholder copy; wording for participants has not been reviewed.
fn likelihood_sentence(p: f64) -> &'static str {
    match p {
        p if p < 0.2 => "Your results show few signs associated with Parkinsonism.",
        p if p < 0.5 => "Your results show some signs that can be associated with Parkinsonism.",
        p if p < 0.8 => "Your results show several signs associated with Parkinsonism.",
        _ => "Your results show many signs associated with Parkinsonism.",
    }
}

fn severity_phrase(s: Severity) -> &'static str {
    match s {
        Severity::None => "no noticeable signs",
        Severity::Slight => "slight signs",
        Severity::Mild => "mild signs",
        Severity::Moderate => "moderate signs",
        Severity::Severe => "strong signs",
    }
}

fn kind_heading(k: ResourceKind) -> &'static str {
    match k {
        ResourceKind::Neurologist => "Neurologists near you",
        ResourceKind::SupportGroup => "Support groups",
        ResourceKind::Exercise => "Exercise",
        ResourceKind::Diet => "Diet",
        ResourceKind::External => "Further reading",
    }
}

/// Plain-text rendering of a report.
pub fn render_summary(report: &RiskReport) -> String {
    let mut out = String::new();
    match report.overall_likelihood {
        Some(p) => {
            out.push_str(&format!("Overall likelihood of signs of Parkinsonism: {:.0}%\n", 100.0 * p));
            out.push_str(likelihood_sentence(p));
            out.push('\n');
        }
        None => out.push_str("We could not assess any of your recordings, so no overall result is available.\n"),
    }
    out.push('\n');
    for s in &report.modality_scores {
        out.push_str(&format!("  {:<7} {}\n", s.modality.as_str(), severity_phrase(s.severity_bucket)));
    }
    for m in &report.not_assessed {
        out.push_str(&format!("  {:<7} not assessed\n", m.as_str()));
    }
    let mut last_kind = None;
    for r in &report.resources {
        if last_kind != Some(r.kind) {
            out.push_str(&format!("\n{}:\n", kind_heading(r.kind)));
            last_kind = Some(r.kind);
        }
        let link = r.url.as_deref().or(r.contact.as_deref()).unwrap_or("");
        out.push_str(format!("  - {} {}\n", r.title, link).trim_end());
        out.push('\n');
    }
    out.push('\n');
    out.push_str(&report.disclaimer);
    out.push('\n');
    out
}
