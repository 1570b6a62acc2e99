//! Acoustic features of the pangram recording (`speech.v1`).
//!
//! All energy thresholds are relative to the loudest frame of the clip, so
//! pitch statistics, jitter and voicing do not depend on recording gain.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::AudioClip;
use crate::model::FeatureVector;
use crate::peaks;

pub const SCHEMA_ID: &str = "speech.v1";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpeechError {
    #[error("clip is too short: {have_s:.3} s, need at least {need_s:.3} s")]
    ClipTooShort { have_s: f64, need_s: f64 },
    #[error("not enough voiced speech: {0}")]
    InsufficientVoicing(String),
    #[error("invalid analysis settings: {0}")]
    InvalidConfig(String),
}

/// Analysis settings. The defaults are the `speech.v1` settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeechConfig {
    pub frame_s: f64,
    pub hop_s: f64,
    pub f0_min_hz: f64,
    pub f0_max_hz: f64,
    /// Minimum normalized autocorrelation peak for a voiced frame.
    pub voicing_threshold: f64,
    /// Frames with RMS below this fraction of the loudest frame are silent.
    pub silence_ratio: f64,
    pub min_pause_s: f64,
    /// Minimum clip length after silence trimming.
    pub min_speech_s: f64,
    pub n_mels: usize,
    pub n_coeffs: usize,
    /// Prominence (fraction of peak RMS) of an energy peak counted by the
    /// speech-rate proxy.
    pub rate_peak_prominence: f64,
}

impl Default for SpeechConfig {
    fn default() -> Self {
        SpeechConfig {
            frame_s: 0.025,
            hop_s: 0.010,
            f0_min_hz: 75.0,
            f0_max_hz: 500.0,
            voicing_threshold: 0.45,
            silence_ratio: 0.02,
            min_pause_s: 0.150,
            min_speech_s: 1.0,
            n_mels: 26,
            n_coeffs: 13,
            rate_peak_prominence: 0.25,
        }
    }
}

fn samples_for(seconds: f64, rate: u32) -> usize {
    ((seconds * rate as f64).round() as usize).max(1)
}

/// Start offsets of every full frame.
fn frame_starts(n: usize, frame_len: usize, hop_len: usize) -> Vec<usize> {
    if n < frame_len {
        return Vec::new();
    }
    (0..=(n - frame_len) / hop_len).map(|i| i * hop_len).collect()
}

/// Symmetric Hann window.
pub fn hann(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    (0..len).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / (len - 1) as f64).cos()).collect()
}

/// Splits a clip into Hann-windowed frames;
/// `count = floor((N - frame_len) / hop_len) + 1`.
pub fn frame_signal(clip: &AudioClip, frame_s: f64, hop_s: f64) -> Result<Vec<Vec<f64>>, SpeechError> {
    if !(hop_s > 0.0 && frame_s >= hop_s) {
        return Err(SpeechError::InvalidConfig(format!("frame {frame_s} s, hop {hop_s} s")));
    }
    let rate = clip.sample_rate_hz();
    let frame_len = samples_for(frame_s, rate);
    let hop_len = samples_for(hop_s, rate);
    let x = clip.samples();
    if x.len() < frame_len {
        return Err(SpeechError::ClipTooShort { have_s: clip.duration_s(), need_s: frame_s });
    }
    let window = hann(frame_len);
    Ok(frame_starts(x.len(), frame_len, hop_len)
        .into_iter()
        .map(|s| x[s..s + frame_len].iter().zip(&window).map(|(a, w)| a * w).collect())
        .collect())
}

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

/// Per-frame fundamental frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitchTrack {
    /// Frame centres, seconds from clip start.
    pub frame_times: Vec<f64>,
    /// 0 for unvoiced frames.
    pub f0_hz: Vec<f64>,
    pub voiced: Vec<bool>,
    /// Normalized autocorrelation at the chosen lag (0 when none found).
    pub strength: Vec<f64>,
    pub window_s: f64,
}

impl PitchTrack {
    pub fn voiced_f0(&self) -> impl Iterator<Item = f64> + '_ {
        self.f0_hz.iter().zip(&self.voiced).filter(|(_, v)| **v).map(|(f, _)| *f)
    }

    pub fn voiced_fraction(&self) -> f64 {
        if self.voiced.is_empty() {
            return 0.0;
        }
        self.voiced.iter().filter(|v| **v).count() as f64 / self.voiced.len() as f64
    }
}

/// Normalized cross-correlation of `x[..n-lag]` with `x[lag..]`.
fn nccf(x: &[f64], lag: usize) -> f64 {
    let (a, b) = (&x[..x.len() - lag], &x[lag..]);
    let mut ab = 0.0;
    let mut aa = 0.0;
    let mut bb = 0.0;
    for (p, q) in a.iter().zip(b) {
        ab += p * q;
        aa += p * p;
        bb += q * q;
    }
    let denom = (aa * bb).sqrt();
    if denom > 0.0 {
        ab / denom
    } else {
        0.0
    }
}

/// Autocorrelation pitch tracker with the default voicing settings.
pub fn pitch_track(clip: &AudioClip, f0_min_hz: f64, f0_max_hz: f64) -> Result<PitchTrack, SpeechError> {
    let cfg = SpeechConfig { f0_min_hz, f0_max_hz, ..SpeechConfig::default() };
    pitch_track_with(clip, &cfg)
}

/// Each frame's f0 is the earliest autocorrelation peak in the lag range
/// `[rate / f0_max, rate / f0_min]` reaching 90 % of the best peak, refined by
/// parabolic interpolation. The analysis window spans at least two periods of
/// `f0_min`.
pub fn pitch_track_with(clip: &AudioClip, cfg: &SpeechConfig) -> Result<PitchTrack, SpeechError> {
    if !(cfg.f0_min_hz > 0.0 && cfg.f0_min_hz < cfg.f0_max_hz) {
        return Err(SpeechError::InvalidConfig(format!(
            "f0 range {}..{} Hz",
            cfg.f0_min_hz, cfg.f0_max_hz
        )));
    }
    let rate = clip.sample_rate_hz() as f64;
    let lag_min = rate / cfg.f0_max_hz;
    let lag_max = rate / cfg.f0_min_hz;
    let lo = (lag_min.ceil() as usize).max(1);
    let hi = lag_max.floor() as usize;
    if hi < lo {
        return Err(SpeechError::InvalidConfig(format!("no integer lag fits at {rate} Hz")));
    }
    let hop_len = samples_for(cfg.hop_s, clip.sample_rate_hz());
    let window = samples_for(cfg.frame_s, clip.sample_rate_hz()).max(2 * (hi + 1));
    let x = clip.samples();
    if x.len() < window {
        return Err(SpeechError::ClipTooShort {
            have_s: clip.duration_s(),
            need_s: window as f64 / rate,
        });
    }
    let starts = frame_starts(x.len(), window, hop_len);
    let energies: Vec<f64> = starts.iter().map(|&s| rms(&x[s..s + window])).collect();
    let peak_energy = energies.iter().cloned().fold(0.0, f64::max);

    let mut out = PitchTrack {
        frame_times: Vec::with_capacity(starts.len()),
        f0_hz: Vec::with_capacity(starts.len()),
        voiced: Vec::with_capacity(starts.len()),
        strength: Vec::with_capacity(starts.len()),
        window_s: window as f64 / rate,
    };
    let mut r = vec![0.0; hi + 2];
    let mut frame = vec![0.0; window];
    for (&s, &energy) in starts.iter().zip(&energies) {
        out.frame_times.push((s as f64 + window as f64 / 2.0) / rate);
        let silent = peak_energy <= 0.0 || energy < cfg.silence_ratio * peak_energy;
        let mean = x[s..s + window].iter().sum::<f64>() / window as f64;
        for (d, v) in frame.iter_mut().zip(&x[s..s + window]) {
            *d = v - mean;
        }
        let (f0, strength) = if silent { (0.0, 0.0) } else { best_lag(&frame, lo, hi, &mut r, rate) };
        let strength = strength.min(1.0);
        let voiced = !silent && f0 > 0.0 && strength >= cfg.voicing_threshold;
        out.f0_hz.push(if voiced { f0.clamp(cfg.f0_min_hz, cfg.f0_max_hz) } else { 0.0 });
        out.voiced.push(voiced);
        out.strength.push(strength);
    }
    Ok(out)
}

/// Returns (f0, peak strength), or (0, 0) when no local maximum exists.
fn best_lag(frame: &[f64], lo: usize, hi: usize, r: &mut [f64], rate: f64) -> (f64, f64) {
    for lag in lo - 1..=hi + 1 {
        r[lag] = if lag == 0 { 1.0 } else { nccf(frame, lag) };
    }
    let maxima: Vec<usize> = (lo..=hi).filter(|&l| r[l] > r[l - 1] && r[l] >= r[l + 1]).collect();
    let Some(best) = maxima.iter().map(|&l| r[l]).reduce(f64::max) else {
        return (0.0, 0.0);
    };
    if best <= 0.0 {
        return (0.0, 0.0);
    }
    let lag = maxima.into_iter().find(|&l| r[l] >= 0.9 * best).expect("best is among maxima");
    let (a, b, c) = (r[lag - 1], r[lag], r[lag + 1]);
    let curvature = a - 2.0 * b + c;
    let delta = if curvature < 0.0 { (0.5 * (a - c) / curvature).clamp(-0.5, 0.5) } else { 0.0 };
    let strength = b - 0.25 * (a - c) * delta;
    (rate / (lag as f64 + delta), strength)
}

/// Period and amplitude perturbation of the voiced parts of a clip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub jitter_local: f64,
    pub shimmer_local: f64,
    pub periods: usize,
}

/// Waveform maxima, one per glottal cycle, grouped by voiced run.
fn cycle_peaks(clip: &AudioClip, pitch: &PitchTrack) -> Vec<Vec<(f64, f64)>> {
    let x = clip.samples();
    let rate = clip.sample_rate_hz() as f64;
    let half = pitch.window_s / 2.0;
    let period_at = |pos: f64| -> f64 {
        let t = pos / rate;
        let mut best = (f64::INFINITY, 0.0);
        for ((ft, f0), v) in pitch.frame_times.iter().zip(&pitch.f0_hz).zip(&pitch.voiced) {
            if *v && (ft - t).abs() < best.0 {
                best = ((ft - t).abs(), *f0);
            }
        }
        rate / best.1
    };
    let refine = |i: usize| -> (f64, f64) {
        if i == 0 || i + 1 >= x.len() {
            return (i as f64, x[i]);
        }
        let (a, b, c) = (x[i - 1], x[i], x[i + 1]);
        let curvature = a - 2.0 * b + c;
        if curvature >= 0.0 {
            return (i as f64, b);
        }
        let d = (0.5 * (a - c) / curvature).clamp(-0.5, 0.5);
        (i as f64 + d, b - 0.25 * (a - c) * d)
    };
    let argmax = |lo: usize, hi: usize| -> usize {
        (lo..=hi).fold(lo, |best, i| if x[i] > x[best] { i } else { best })
    };

    let mut runs = Vec::new();
    let mut i = 0;
    while i < pitch.voiced.len() {
        if !pitch.voiced[i] {
            i += 1;
            continue;
        }
        let mut j = i;
        while j + 1 < pitch.voiced.len() && pitch.voiced[j + 1] {
            j += 1;
        }
        let s0 = ((pitch.frame_times[i] - half) * rate).round().max(0.0) as usize;
        let s1 = (((pitch.frame_times[j] + half) * rate).round() as usize).min(x.len());
        runs.push((s0, s1));
        i = j + 1;
    }

    let mut out = Vec::new();
    for (s0, s1) in runs {
        let mut peaks_in_run = Vec::new();
        let t0 = period_at(s0 as f64);
        let first_hi = ((s0 as f64 + 1.5 * t0) as usize).min(s1.saturating_sub(2));
        let first = (s0.max(1)..=first_hi)
            .filter(|&k| x[k] >= x[k - 1] && x[k] >= x[k + 1])
            .fold(None, |best: Option<usize>, k| match best {
                Some(b) if x[b] >= x[k] => Some(b),
                _ => Some(k),
            });
        let Some(mut p) = first else { continue };
        peaks_in_run.push(refine(p));
        loop {
            let t = period_at(p as f64);
            let lo = (p as f64 + 0.7 * t).ceil() as usize;
            let hi = (p as f64 + 1.3 * t).floor() as usize;
            if hi >= s1 || lo > hi {
                break;
            }
            p = argmax(lo, hi);
            peaks_in_run.push(refine(p));
        }
        out.push(peaks_in_run);
    }
    out
}

/// Local jitter (mean absolute difference of consecutive periods over the
/// mean period) and local shimmer (the same on cycle peak amplitudes).
pub fn jitter_shimmer(clip: &AudioClip, pitch: &PitchTrack) -> Result<Perturbation, SpeechError> {
    let runs = cycle_peaks(clip, pitch);
    let mut periods_total = 0usize;
    let (mut period_sum, mut period_diff_sum, mut period_diffs) = (0.0, 0.0, 0usize);
    let (mut amp_sum, mut amp_count, mut amp_diff_sum, mut amp_diffs) = (0.0, 0usize, 0.0, 0usize);
    for run in &runs {
        let periods: Vec<f64> = run.windows(2).map(|w| w[1].0 - w[0].0).collect();
        periods_total += periods.len();
        period_sum += periods.iter().sum::<f64>();
        for w in periods.windows(2) {
            period_diff_sum += (w[1] - w[0]).abs();
            period_diffs += 1;
        }
        if run.len() >= 2 {
            amp_sum += run.iter().map(|p| p.1).sum::<f64>();
            amp_count += run.len();
            for w in run.windows(2) {
                amp_diff_sum += (w[1].1 - w[0].1).abs();
                amp_diffs += 1;
            }
        }
    }
    if periods_total < 3 || period_diffs == 0 {
        return Err(SpeechError::InsufficientVoicing(format!(
            "{periods_total} glottal periods detected, need 3 consecutive"
        )));
    }
    let mean_period = period_sum / periods_total as f64;
    let mean_amp = amp_sum / amp_count as f64;
    if mean_amp <= 0.0 {
        return Err(SpeechError::InsufficientVoicing("cycle amplitudes are not positive".into()));
    }
    Ok(Perturbation {
        jitter_local: (period_diff_sum / period_diffs as f64) / mean_period,
        shimmer_local: (amp_diff_sum / amp_diffs as f64) / mean_amp,
        periods: periods_total,
    })
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular filters equally spaced on the mel scale from 0 Hz to Nyquist,
/// evaluated at the FFT bin frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    pub n_fft: usize,
    pub sample_rate_hz: u32,
    /// `n_mels` rows of `n_fft / 2 + 1` weights.
    pub weights: Vec<Vec<f64>>,
}

impl MelFilterbank {
    pub fn new(n_mels: usize, n_fft: usize, sample_rate_hz: u32) -> Self {
        let n_bins = n_fft / 2 + 1;
        let nyquist = sample_rate_hz as f64 / 2.0;
        let mel_hi = hz_to_mel(nyquist);
        let edges: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(mel_hi * i as f64 / (n_mels + 1) as f64))
            .collect();
        let bin_hz = sample_rate_hz as f64 / n_fft as f64;
        let weights = (0..n_mels)
            .map(|m| {
                let (lo, centre, hi) = (edges[m], edges[m + 1], edges[m + 2]);
                let mut row: Vec<f64> = (0..n_bins)
                    .map(|k| {
                        let f = k as f64 * bin_hz;
                        ((f - lo) / (centre - lo)).min((hi - f) / (hi - centre)).max(0.0)
                    })
                    .collect();
                // A filter narrower than the bin spacing would be empty;
                // give it the bin nearest its centre instead.
                if row.iter().all(|w| *w == 0.0) {
                    let k = ((centre / bin_hz).round() as usize).min(n_bins - 1);
                    row[k] = 1.0;
                }
                row
            })
            .collect();
        MelFilterbank { n_fft, sample_rate_hz, weights }
    }

    pub fn apply(&self, power: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .map(|row| row.iter().zip(power).map(|(w, p)| w * p).sum())
            .collect()
    }
}

/// `|X_k|^2` for `k = 0..=n_fft/2` of the zero-padded frame.
pub fn power_spectrum(frame: &[f64], n_fft: usize, planner: &mut FftPlanner<f64>) -> Vec<f64> {
    let fft = planner.plan_fft_forward(n_fft);
    let mut buf: Vec<Complex<f64>> = frame
        .iter()
        .map(|&v| Complex::new(v, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(n_fft)
        .collect();
    fft.process(&mut buf);
    buf[..n_fft / 2 + 1].iter().map(|c| c.norm_sqr()).collect()
}

/// Unnormalized type-II DCT, first `n_out` coefficients.
pub fn dct2(x: &[f64], n_out: usize) -> Vec<f64> {
    let n = x.len() as f64;
    (0..n_out)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(m, v)| v * (PI * k as f64 * (m as f64 + 0.5) / n).cos())
                .sum()
        })
        .collect()
}

/// Smallest energy passed to the logarithm.
const LOG_FLOOR: f64 = 1e-300;

/// Mel-cepstral analysis state for one frame length and sample rate.
pub struct MfccAnalyzer {
    pub filterbank: MelFilterbank,
    pub frame_len: usize,
    pub hop_len: usize,
    pub n_coeffs: usize,
    planner: FftPlanner<f64>,
}

impl MfccAnalyzer {
    pub fn new(sample_rate_hz: u32, cfg: &SpeechConfig) -> Self {
        let frame_len = samples_for(cfg.frame_s, sample_rate_hz);
        let n_fft = frame_len.next_power_of_two();
        MfccAnalyzer {
            filterbank: MelFilterbank::new(cfg.n_mels, n_fft, sample_rate_hz),
            frame_len,
            hop_len: samples_for(cfg.hop_s, sample_rate_hz),
            n_coeffs: cfg.n_coeffs,
            planner: FftPlanner::new(),
        }
    }

    /// Filterbank energies of an already windowed frame.
    pub fn mel_energies(&mut self, windowed: &[f64]) -> Vec<f64> {
        let power = power_spectrum(windowed, self.filterbank.n_fft, &mut self.planner);
        self.filterbank.apply(&power)
    }

    pub fn log_mel_energies(&mut self, windowed: &[f64]) -> Vec<f64> {
        self.mel_energies(windowed).into_iter().map(|e| e.max(LOG_FLOOR).ln()).collect()
    }

    pub fn coefficients(&mut self, windowed: &[f64]) -> Vec<f64> {
        dct2(&self.log_mel_energies(windowed), self.n_coeffs)
    }
}

/// Per-frame mel-frequency cepstral coefficients (25 ms Hann frames, 10 ms hop).
pub fn mfcc(clip: &AudioClip, n_mels: usize, n_coeffs: usize) -> Result<Vec<Vec<f64>>, SpeechError> {
    let cfg = SpeechConfig { n_mels, n_coeffs, ..SpeechConfig::default() };
    mfcc_with(clip, &cfg)
}

pub fn mfcc_with(clip: &AudioClip, cfg: &SpeechConfig) -> Result<Vec<Vec<f64>>, SpeechError> {
    if cfg.n_mels == 0 || cfg.n_coeffs == 0 || cfg.n_coeffs > cfg.n_mels {
        return Err(SpeechError::InvalidConfig(format!("{} mels, {} coefficients", cfg.n_mels, cfg.n_coeffs)));
    }
    let frames = frame_signal(clip, cfg.frame_s, cfg.hop_s)?;
    let mut analyzer = MfccAnalyzer::new(clip.sample_rate_hz(), cfg);
    Ok(frames.iter().map(|f| analyzer.coefficients(f)).collect())
}

fn mean_std(x: &[f64]) -> (f64, f64) {
    if x.is_empty() {
        return (0.0, 0.0);
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Feature names of `speech.v1`, in vector order.
pub fn feature_names(cfg: &SpeechConfig) -> Vec<String> {
    let mut names: Vec<String> =
        ["f0_mean_hz", "f0_std_hz", "f0_range_hz", "voiced_fraction", "jitter_local", "shimmer_local"]
            .iter()
            .map(|s| s.to_string())
            .collect();
    names.extend((0..cfg.n_coeffs).map(|i| format!("mfcc{i:02}_mean")));
    names.extend((0..cfg.n_coeffs).map(|i| format!("mfcc{i:02}_std")));
    names.extend(["speech_rate_hz", "pause_count", "pause_mean_s", "hnr_proxy"].iter().map(|s| s.to_string()));
    names
}

/// Silent-frame mask over rectangular analysis frames.
struct EnergyFrames {
    rms: Vec<f64>,
    frame_len: usize,
    hop_len: usize,
}

impl EnergyFrames {
    fn new(x: &[f64], frame_len: usize, hop_len: usize) -> Self {
        let rms = frame_starts(x.len(), frame_len, hop_len).into_iter().map(|s| rms(&x[s..s + frame_len])).collect();
        EnergyFrames { rms, frame_len, hop_len }
    }

    fn silent(&self, ratio: f64) -> Vec<bool> {
        let peak = self.rms.iter().cloned().fold(0.0, f64::max);
        self.rms.iter().map(|&e| peak <= 0.0 || e < ratio * peak).collect()
    }
}

/// Pause statistics of a trimmed clip: (count, mean length in seconds).
fn pauses(silent: &[bool], frame_s: f64, hop_s: f64, min_pause_s: f64) -> (usize, f64) {
    let mut lengths = Vec::new();
    let mut run = 0usize;
    for &s in silent.iter().chain(std::iter::once(&false)) {
        if s {
            run += 1;
        } else if run > 0 {
            let length = (run - 1) as f64 * hop_s + frame_s;
            if length >= min_pause_s {
                lengths.push(length);
            }
            run = 0;
        }
    }
    let mean = if lengths.is_empty() { 0.0 } else { lengths.iter().sum::<f64>() / lengths.len() as f64 };
    (lengths.len(), mean)
}

/// Drops leading and trailing silent frames.
pub fn trim_silence(clip: &AudioClip, cfg: &SpeechConfig) -> Result<AudioClip, SpeechError> {
    let rate = clip.sample_rate_hz();
    let (frame_len, hop_len) = (samples_for(cfg.frame_s, rate), samples_for(cfg.hop_s, rate));
    let energy = EnergyFrames::new(clip.samples(), frame_len, hop_len);
    let silent = energy.silent(cfg.silence_ratio);
    let first = silent.iter().position(|s| !s);
    let last = silent.iter().rposition(|s| !s);
    match (first, last) {
        (Some(a), Some(b)) => clip
            .slice(a * hop_len..b * hop_len + frame_len)
            .map_err(|e| SpeechError::InvalidConfig(e.to_string())),
        _ => Err(SpeechError::ClipTooShort { have_s: 0.0, need_s: cfg.min_speech_s }),
    }
}

/// The `speech.v1` vector with default settings.
pub fn extract_speech_features(clip: &AudioClip) -> Result<FeatureVector, SpeechError> {
    extract_speech_features_with(clip, &SpeechConfig::default())
}

pub fn extract_speech_features_with(clip: &AudioClip, cfg: &SpeechConfig) -> Result<FeatureVector, SpeechError> {
    let trimmed = trim_silence(clip, cfg)?;
    if trimmed.duration_s() < cfg.min_speech_s {
        return Err(SpeechError::ClipTooShort { have_s: trimmed.duration_s(), need_s: cfg.min_speech_s });
    }

    let pitch = pitch_track_with(&trimmed, cfg)?;
    let f0: Vec<f64> = pitch.voiced_f0().collect();
    if f0.is_empty() {
        return Err(SpeechError::InsufficientVoicing("no voiced frames".into()));
    }
    let (f0_mean, f0_std) = mean_std(&f0);
    let f0_range = f0.iter().cloned().fold(f64::MIN, f64::max) - f0.iter().cloned().fold(f64::MAX, f64::min);
    let perturbation = jitter_shimmer(&trimmed, &pitch)?;
    let voiced_strength: Vec<f64> =
        pitch.strength.iter().zip(&pitch.voiced).filter(|(_, v)| **v).map(|(s, _)| *s).collect();
    let hnr_proxy = mean_std(&voiced_strength).0;

    let coeffs = mfcc_with(&trimmed, cfg)?;
    let columns: Vec<(f64, f64)> = (0..cfg.n_coeffs)
        .map(|k| mean_std(&coeffs.iter().map(|row| row[k]).collect::<Vec<_>>()))
        .collect();

    let rate = trimmed.sample_rate_hz();
    let energy = EnergyFrames::new(trimmed.samples(), samples_for(cfg.frame_s, rate), samples_for(cfg.hop_s, rate));
    let frame_s = energy.frame_len as f64 / rate as f64;
    let hop_s = energy.hop_len as f64 / rate as f64;
    let (pause_count, pause_mean) = pauses(&energy.silent(cfg.silence_ratio), frame_s, hop_s, cfg.min_pause_s);
    let peak_rms = energy.rms.iter().cloned().fold(0.0, f64::max);
    let envelope: Vec<f64> = energy.rms.iter().map(|e| e / peak_rms).collect();
    let positions: Vec<f64> = (0..envelope.len()).map(|i| i as f64 * hop_s).collect();
    let syllables = peaks::find_peaks(&envelope, &positions, cfg.rate_peak_prominence, 0.1).len();
    let speech_rate = syllables as f64 / trimmed.duration_s();

    let mut values = vec![
        f0_mean,
        f0_std,
        f0_range,
        pitch.voiced_fraction(),
        perturbation.jitter_local,
        perturbation.shimmer_local,
    ];
    values.extend(columns.iter().map(|c| c.0));
    values.extend(columns.iter().map(|c| c.1));
    values.extend([speech_rate, pause_count as f64, pause_mean, hnr_proxy]);
    FeatureVector::new(SCHEMA_ID, feature_names(cfg), values)
        .map_err(|e| SpeechError::InsufficientVoicing(e.to_string()))
}
