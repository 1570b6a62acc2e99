//! Finger-tapping kinematics (`motor.v1`) from MediaPipe hand tracks.
//!
//! The aperture signal is the thumb-tip to index-tip distance divided by the
//! wrist to middle-finger-MCP distance, which makes every feature independent
//! of how far the hand is from the camera.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{LandmarkTrack, TrackKind};
use crate::model::FeatureVector;
use crate::peaks;

pub const SCHEMA_ID: &str = "motor.v1";

pub const WRIST: usize = 0;
pub const THUMB_TIP: usize = 4;
pub const INDEX_TIP: usize = 8;
pub const MIDDLE_MCP: usize = 9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MotorError {
    #[error("expected a hand track")]
    NotAHandTrack,
    #[error("hand size is degenerate in frame {0}")]
    DegenerateGeometry(usize),
    #[error("signal lasts {have_s:.2} s, need at least {need_s:.2} s")]
    SignalTooShort { have_s: f64, need_s: f64 },
    #[error("{0} taps detected, need at least 4")]
    TooFewTaps(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApertureSignal {
    pub t: Vec<f64>,
    pub a: Vec<f64>,
    /// Sample indices that start a new segment after a recording gap.
    pub segment_starts: Vec<usize>,
}

impl ApertureSignal {
    pub fn duration_s(&self) -> f64 {
        match (self.t.first(), self.t.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }

    /// `[start, end)` sample ranges of each segment.
    pub fn segments(&self) -> Vec<(usize, usize)> {
        let mut bounds = vec![0];
        bounds.extend(self.segment_starts.iter().copied().filter(|&s| s > 0 && s < self.a.len()));
        bounds.push(self.a.len());
        bounds.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

fn dist(p: [f64; 3], q: [f64; 3]) -> f64 {
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
}

/// Normalized thumb–index aperture per frame.
pub fn aperture(track: &LandmarkTrack) -> Result<ApertureSignal, MotorError> {
    if track.kind != TrackKind::Hand {
        return Err(MotorError::NotAHandTrack);
    }
    let mut t = Vec::with_capacity(track.frames.len());
    let mut a = Vec::with_capacity(track.frames.len());
    for (i, f) in track.frames.iter().enumerate() {
        let size = dist(f.points[WRIST], f.points[MIDDLE_MCP]);
        if !(size >= 1e-6) {
            return Err(MotorError::DegenerateGeometry(i));
        }
        t.push(f.t);
        a.push(dist(f.points[THUMB_TIP], f.points[INDEX_TIP]) / size);
    }
    Ok(ApertureSignal { t, a, segment_starts: track.segment_starts.clone() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TapEvent {
    pub t_peak: f64,
    /// Peak minus preceding valley (following valley for a tap with no
    /// valley before it).
    pub amplitude: f64,
    pub rise_speed: f64,
    pub fall_speed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TapConfig {
    /// Minimum peak prominence as a fraction of the signal range.
    pub rel_prominence: f64,
    pub min_period_s: f64,
    pub min_duration_s: f64,
}

impl Default for TapConfig {
    fn default() -> Self {
        TapConfig { rel_prominence: 0.15, min_period_s: 0.1, min_duration_s: 2.0 }
    }
}

fn argmin(a: &[f64], lo: usize, hi: usize) -> usize {
    (lo..=hi).fold(lo, |best, i| if a[i] < a[best] { i } else { best })
}

/// Tap peak indices: local maxima with enough prominence and spacing.
pub fn tap_peak_indices(sig: &ApertureSignal, cfg: &TapConfig) -> Vec<usize> {
    let (lo, hi) = sig.a.iter().fold((f64::MAX, f64::MIN), |(l, h), &v| (l.min(v), h.max(v)));
    let threshold = cfg.rel_prominence * (hi - lo).max(0.0);
    peaks::find_peaks(&sig.a, &sig.t, threshold, cfg.min_period_s).into_iter().map(|p| p.index).collect()
}

/// One event per qualifying aperture peak, in time order.
pub fn detect_taps(sig: &ApertureSignal, cfg: &TapConfig) -> Result<Vec<TapEvent>, MotorError> {
    if sig.duration_s() < cfg.min_duration_s {
        return Err(MotorError::SignalTooShort { have_s: sig.duration_s(), need_s: cfg.min_duration_s });
    }
    let peak_idx = tap_peak_indices(sig, cfg);
    let segments = sig.segments();
    let segment_of = |i: usize| segments.iter().find(|(s, e)| i >= *s && i < *e).copied().unwrap_or((0, sig.a.len()));
    let (a, t) = (&sig.a, &sig.t);
    let mut taps = Vec::with_capacity(peak_idx.len());
    for (k, &p) in peak_idx.iter().enumerate() {
        let (seg_start, seg_end) = segment_of(p);
        let prev = k.checked_sub(1).map(|j| peak_idx[j]).filter(|&q| q >= seg_start);
        let next = peak_idx.get(k + 1).copied().filter(|&q| q < seg_end);
        let before = argmin(a, prev.unwrap_or(seg_start), p);
        let after = argmin(a, p, next.unwrap_or(seg_end - 1));
        let has_valley_before = prev.is_some() || before > seg_start;
        let fall = a[p] - a[after];
        let fall_speed = if after > p { fall / (t[after] - t[p]) } else { 0.0 };
        let (amplitude, rise_speed) = if has_valley_before && before < p {
            let rise = a[p] - a[before];
            (rise, rise / (t[p] - t[before]))
        } else {
            (fall, fall_speed)
        };
        taps.push(TapEvent { t_peak: t[p], amplitude, rise_speed, fall_speed });
    }
    Ok(taps)
}

pub fn feature_names() -> Vec<String> {
    [
        "tap_rate_hz",
        "amplitude_mean",
        "amplitude_std",
        "amplitude_cv",
        "amplitude_decrement",
        "iti_mean_s",
        "iti_cv",
        "rise_speed_mean",
        "fall_speed_mean",
        "hesitation_count",
        "freeze_fraction",
        "interruption_count",
    ]
    .map(String::from)
    .to_vec()
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn std(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64).sqrt()
}

fn median(x: &[f64]) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    }
}

/// Least-squares slope of `y` against its index.
fn index_slope(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let x_mean = (n - 1.0) / 2.0;
    let y_mean = mean(y);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, v) in y.iter().enumerate() {
        let dx = i as f64 - x_mean;
        sxy += dx * (v - y_mean);
        sxx += dx * dx;
    }
    sxy / sxx
}

/// Share of within-segment time where the aperture speed is below 5 % of
/// its median.
fn freeze_fraction(sig: &ApertureSignal) -> f64 {
    let mut steps = Vec::new();
    for (s, e) in sig.segments() {
        for i in s + 1..e {
            let dt = sig.t[i] - sig.t[i - 1];
            steps.push(((sig.a[i] - sig.a[i - 1]).abs() / dt, dt));
        }
    }
    if steps.is_empty() {
        return 0.0;
    }
    let speeds: Vec<f64> = steps.iter().map(|s| s.0).collect();
    let threshold = 0.05 * median(&speeds);
    let total: f64 = steps.iter().map(|s| s.1).sum();
    let frozen: f64 = steps.iter().filter(|s| s.0 < threshold).map(|s| s.1).sum();
    frozen / total
}

/// The `motor.v1` vector from a signal and its detected taps.
pub fn motor_features_from_taps(sig: &ApertureSignal, taps: &[TapEvent]) -> Result<FeatureVector, MotorError> {
    if taps.len() < 4 {
        return Err(MotorError::TooFewTaps(taps.len()));
    }
    let amps: Vec<f64> = taps.iter().map(|t| t.amplitude).collect();
    let itis: Vec<f64> = taps.windows(2).map(|w| w[1].t_peak - w[0].t_peak).collect();
    let amp_mean = mean(&amps);
    let iti_mean = mean(&itis);
    let iti_median = median(&itis);
    let values = vec![
        taps.len() as f64 / sig.duration_s(),
        amp_mean,
        std(&amps),
        std(&amps) / amp_mean,
        index_slope(&amps) / amp_mean,
        iti_mean,
        std(&itis) / iti_mean,
        mean(&taps.iter().map(|t| t.rise_speed).collect::<Vec<_>>()),
        mean(&taps.iter().map(|t| t.fall_speed).collect::<Vec<_>>()),
        itis.iter().filter(|&&d| d > 2.0 * iti_median).count() as f64,
        freeze_fraction(sig),
        sig.segments().len().saturating_sub(1) as f64,
    ];
    FeatureVector::new(SCHEMA_ID, feature_names(), values).map_err(|_| MotorError::TooFewTaps(taps.len()))
}

/// Taps and features for one hand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotorAnalysis {
    pub taps: Vec<TapEvent>,
    pub features: FeatureVector,
}

pub fn analyze_signal(sig: &ApertureSignal, cfg: &TapConfig) -> Result<MotorAnalysis, MotorError> {
    let taps = detect_taps(sig, cfg)?;
    let features = motor_features_from_taps(sig, &taps)?;
    Ok(MotorAnalysis { taps, features })
}

/// The `motor.v1` vector with default tap detection.
pub fn extract_motor_features(sig: &ApertureSignal) -> Result<FeatureVector, MotorError> {
    analyze_signal(sig, &TapConfig::default()).map(|m| m.features)
}
