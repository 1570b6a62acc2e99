//! Seeded synthetic recordings with planted effects, for tests, demos and
//! the cohort benchmarks. Nothing here resembles real patient data beyond
//! the direction of each effect.
//!
//! * Voice: harmonic pulse train with per-cycle period and amplitude
//!   perturbation, breath noise, syllable-rate envelope and one pause.
//!   Affected voices get more jitter, shimmer and noise, flatter intonation,
//!   slower syllables and a longer pause.
//! * Face: a 468-point mesh moving towards a task-specific expression, with
//!   action-unit intensities. Affected faces move less and less
//!   symmetrically.
//! * Hand: finger tapping with rate, amplitude, decrement and hesitations
//!   driven by a 0–4 severity.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::face::{self, landmarks};
use crate::ingest::{write_wav, AudioClip, LandmarkFrame, LandmarkTrack, Point3, TrackKind, FACE_POINTS, HAND_POINTS};
use crate::learners::{Dataset, LearnError, TaskType};
use crate::model::{FeatureVector, TaskKind};
use crate::{motor, speech};

pub const VOICE_RATE_HZ: u32 = 8000;
pub const FACE_FPS: f64 = 15.0;
pub const HAND_FPS: f64 = 30.0;

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gauss(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn round_to(x: f64, digits: i32) -> f64 {
    let k = 10f64.powi(digits);
    (x * k).round() / k
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoiceParams {
    pub f0_hz: f64,
    pub intonation_hz: f64,
    pub jitter: f64,
    pub shimmer: f64,
    pub noise: f64,
    pub syllable_rate_hz: f64,
    pub pause_s: f64,
    pub speech_s: f64,
}

impl VoiceParams {
    pub fn sample(rng: &mut impl Rng, affected: bool) -> VoiceParams {
        let f0_hz = rng.random_range(95.0..210.0);
        let speech_s = rng.random_range(1.5..1.8);
        if affected {
            VoiceParams {
                f0_hz,
                intonation_hz: rng.random_range(2.0..10.0),
                jitter: rng.random_range(0.010..0.030),
                shimmer: rng.random_range(0.06..0.15),
                noise: rng.random_range(0.04..0.12),
                syllable_rate_hz: rng.random_range(2.8..4.2),
                pause_s: rng.random_range(0.25..0.45),
                speech_s,
            }
        } else {
            VoiceParams {
                f0_hz,
                intonation_hz: rng.random_range(8.0..25.0),
                jitter: rng.random_range(0.002..0.012),
                shimmer: rng.random_range(0.015..0.07),
                noise: rng.random_range(0.01..0.05),
                syllable_rate_hz: rng.random_range(3.8..5.5),
                pause_s: rng.random_range(0.15..0.3),
                speech_s,
            }
        }
    }
}

/// Synthesizes a clip at [`VOICE_RATE_HZ`]: 0.1 s lead-in, speech split by
/// one pause, 0.1 s tail.
pub fn voice_clip(p: &VoiceParams, rng: &mut impl Rng) -> AudioClip {
    let rate = VOICE_RATE_HZ as f64;
    let lead = 0.1;
    let first = p.speech_s * 0.45;
    let total = lead + p.speech_s + p.pause_s + 0.1;
    let n = (total * rate).round() as usize;
    let mut x: Vec<f64> = (0..n).map(|_| 1e-4 * gauss(rng)).collect();
    let voiced = [(lead, lead + first), (lead + first + p.pause_s, lead + p.speech_s + p.pause_s)];
    let harmonics = [1.0, 0.6, 0.36, 0.22];
    let norm: f64 = harmonics.iter().sum();
    for (start, end) in voiced {
        let mut t0 = start;
        while t0 < end {
            let f0 = p.f0_hz + p.intonation_hz * (2.0 * PI * 0.7 * t0).sin();
            let period = (1.0 + p.jitter * gauss(rng)) / f0;
            let env = 0.55 + 0.45 * (PI * p.syllable_rate_hz * (t0 - start)).cos().powi(2);
            let amp = 0.5 * env * (1.0 + p.shimmer * gauss(rng));
            let (i0, i1) = ((t0 * rate).ceil() as usize, (((t0 + period).min(end)) * rate).ceil() as usize);
            for (i, sample) in x.iter_mut().enumerate().take(i1.min(n)).skip(i0) {
                let phase = (i as f64 / rate - t0) / period;
                let shape: f64 =
                    harmonics.iter().enumerate().map(|(h, w)| w * (2.0 * PI * (h + 1) as f64 * phase).cos()).sum();
                *sample += amp * shape / norm + 0.5 * env * p.noise * gauss(rng);
            }
            t0 += period;
        }
    }
    AudioClip::new(x.into_iter().map(|v| v.clamp(-1.0, 1.0)).collect(), VOICE_RATE_HZ).expect("non-empty clip")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceParams {
    /// Scales both landmark motion and action-unit peaks.
    pub expressivity: f64,
    /// Fraction by which the subject's left side under-moves.
    pub asymmetry: f64,
}

impl FaceParams {
    pub fn sample(rng: &mut impl Rng, affected: bool) -> FaceParams {
        if affected {
            FaceParams { expressivity: rng.random_range(0.3..0.8), asymmetry: rng.random_range(0.1..0.45) }
        } else {
            FaceParams { expressivity: rng.random_range(0.7..1.3), asymmetry: rng.random_range(0.0..0.15) }
        }
    }
}

/// Neutral mesh in inter-ocular units: eyes at (±0.5, 0), y grows upwards.
fn neutral_face() -> Vec<Point3> {
    use landmarks::*;
    let mut pts: Vec<Point3> = (0..FACE_POINTS)
        .map(|i| {
            let (r, c) = ((i / 26) as f64, (i % 26) as f64);
            [-0.8 + c * 0.064, 0.5 - r * 0.09, 0.02 * ((i % 7) as f64 - 3.0)]
        })
        .collect();
    pts[RIGHT_EYE_OUTER] = [-0.5, 0.0, 0.0];
    pts[LEFT_EYE_OUTER] = [0.5, 0.0, 0.0];
    pts[RIGHT_MOUTH_CORNER] = [-0.25, -0.75, 0.0];
    pts[LEFT_MOUTH_CORNER] = [0.25, -0.75, 0.0];
    pts[UPPER_LIP_TOP] = [0.0, -0.66, 0.0];
    pts[LOWER_LIP_BOTTOM] = [0.0, -0.86, 0.0];
    pts[UPPER_LIP_INNER] = [0.0, -0.73, 0.0];
    pts[LOWER_LIP_INNER] = [0.0, -0.77, 0.0];
    for (k, (&r, &l)) in RIGHT_BROW.iter().zip(&LEFT_BROW).enumerate() {
        let x = 0.2 + 0.1 * k as f64;
        pts[r] = [-x, 0.22, 0.0];
        pts[l] = [x, 0.22, 0.0];
    }
    pts
}

/// Peak displacement of each moving landmark on the subject's right side,
/// centre-line landmarks included; left-side motion mirrors it.
fn expression_targets(task: TaskKind) -> (Vec<(usize, [f64; 2])>, &'static [(&'static str, f64)]) {
    use landmarks::*;
    let brow = |dy: f64, dx: f64| RIGHT_BROW.iter().map(move |&i| (i, [dx, dy])).collect::<Vec<_>>();
    match task {
        TaskKind::FaceSmile => (
            vec![(RIGHT_MOUTH_CORNER, [-0.12, 0.08]), (LOWER_LIP_INNER, [0.0, -0.03]), (UPPER_LIP_INNER, [0.0, 0.01])],
            &[("AU06", 2.5), ("AU12", 3.5), ("AU25", 1.5)],
        ),
        TaskKind::FaceSurprise => {
            let mut m = brow(0.12, 0.0);
            m.extend([(LOWER_LIP_INNER, [0.0, -0.18]), (LOWER_LIP_BOTTOM, [0.0, -0.18]), (RIGHT_MOUTH_CORNER, [0.03, -0.02])]);
            (m, &[("AU01", 3.0), ("AU02", 2.8), ("AU25", 2.5), ("AU26", 3.0)])
        }
        _ => {
            let mut m = brow(-0.06, 0.03);
            m.extend([(UPPER_LIP_TOP, [0.0, 0.06]), (UPPER_LIP_INNER, [0.0, 0.04]), (RIGHT_MOUTH_CORNER, [0.04, 0.02])]);
            (m, &[("AU04", 3.0), ("AU09", 3.2)])
        }
    }
}

fn mirror_of(i: usize) -> Option<usize> {
    landmarks::MIRROR_PAIRS.iter().find(|(r, _)| *r == i).map(|(_, l)| *l)
}

/// Onset, hold and release over `duration`.
fn expression_envelope(t: f64, duration: f64) -> f64 {
    let u = t / duration;
    let ramp = |v: f64| 0.5 - 0.5 * (PI * v.clamp(0.0, 1.0)).cos();
    ramp((u - 0.1) / 0.3) * (1.0 - ramp((u - 0.75) / 0.25))
}

/// Similarity transform into image coordinates.
struct Placement {
    scale: f64,
    cos: f64,
    sin: f64,
    offset: [f64; 2],
}

impl Placement {
    fn sample(rng: &mut impl Rng, scale: std::ops::Range<f64>) -> Placement {
        let angle: f64 = rng.random_range(-0.15..0.15);
        Placement {
            scale: rng.random_range(scale),
            cos: angle.cos(),
            sin: angle.sin(),
            offset: [rng.random_range(0.35..0.65), rng.random_range(0.35..0.65)],
        }
    }

    /// Maps a y-up model point to y-down image coordinates.
    fn apply(&self, p: Point3) -> Point3 {
        let (x, y) = (p[0] * self.cos - p[1] * self.sin, p[0] * self.sin + p[1] * self.cos);
        [
            round_to(self.offset[0] + self.scale * x, 5),
            round_to(self.offset[1] - self.scale * y, 5),
            round_to(self.scale * p[2], 5),
        ]
    }
}

pub fn expression_track(task: TaskKind, p: &FaceParams, rng: &mut impl Rng) -> LandmarkTrack {
    assert!(TaskKind::FACE.contains(&task), "{task} is not an expression task");
    let duration = 2.0;
    let n = (duration * FACE_FPS).round() as usize + 1;
    let base = neutral_face();
    let (moves, aus) = expression_targets(task);
    let place = Placement::sample(rng, 0.15..0.3);
    let jitter = Normal::new(0.0, 0.002).unwrap();
    let au_peaks: Vec<(&str, f64)> = aus.iter().map(|(c, v)| (*c, v * p.expressivity * rng.random_range(0.85..1.15))).collect();
    let frames = (0..n)
        .map(|k| {
            let t = k as f64 / FACE_FPS;
            let e = expression_envelope(t, duration) * p.expressivity;
            let mut pts = base.clone();
            for &(i, [dx, dy]) in &moves {
                pts[i][0] += e * dx;
                pts[i][1] += e * dy;
                if let Some(l) = mirror_of(i) {
                    let side = e * (1.0 - p.asymmetry);
                    pts[l][0] -= side * dx;
                    pts[l][1] += side * dy;
                }
            }
            let env = expression_envelope(t, duration);
            let mut intensities: BTreeMap<String, f64> = face::AU_SUBSET
                .iter()
                .map(|c| (c.to_string(), round_to((0.12 * gauss(rng)).abs(), 4)))
                .collect();
            for (code, peak) in &au_peaks {
                let v = (peak * env + 0.15 * gauss(rng)).max(0.0);
                intensities.insert(code.to_string(), round_to(v, 4));
            }
            let points = pts
                .iter()
                .map(|q| place.apply([q[0] + jitter.sample(rng), q[1] + jitter.sample(rng), q[2]]))
                .collect();
            LandmarkFrame { t: round_to(t, 4), points, aus: Some(intensities) }
        })
        .collect();
    LandmarkTrack::new(TrackKind::Face, frames, FACE_FPS).expect("valid face track")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TapParams {
    pub rate_hz: f64,
    pub amplitude: f64,
    /// Fractional amplitude loss over the recording.
    pub decrement: f64,
    pub closed: f64,
    pub period_jitter: f64,
    pub hesitations: usize,
    pub duration_s: f64,
}

impl TapParams {
    /// Parameters for a hand with bradykinesia `severity` in [0, 4].
    pub fn for_severity(severity: f64, rng: &mut impl Rng) -> TapParams {
        let s = severity.clamp(0.0, 4.0);
        TapParams {
            rate_hz: (3.6 - 0.4 * s + 0.15 * gauss(rng)).max(1.0),
            amplitude: (1.0 - 0.15 * s + 0.04 * gauss(rng)).max(0.2),
            decrement: (0.06 * s + 0.02 * gauss(rng)).clamp(0.0, 0.6),
            closed: 0.05 + 0.01 * rng.random::<f64>(),
            period_jitter: 0.03 + 0.03 * s,
            hesitations: (0.5 * s + rng.random_range(0.0..0.9)) as usize,
            duration_s: 10.0,
        }
    }
}

/// Aperture (thumb–index distance over hand size) as a function of time.
pub fn tapping_aperture(p: &TapParams, rng: &mut impl Rng) -> impl Fn(f64) -> f64 {
    // (start, period, amplitude) per cycle, holds closed between some cycles
    let mut cycles = Vec::new();
    let mut t = 0.0;
    let n_cycles = (p.duration_s * p.rate_hz).ceil() as usize + 2;
    let hold_after: Vec<usize> =
        (0..p.hesitations).map(|_| rng.random_range(2..n_cycles.saturating_sub(3).max(3))).collect();
    for k in 0..n_cycles {
        let period = (1.0 + p.period_jitter * gauss(rng)).max(0.5) / p.rate_hz;
        let amp = p.amplitude * (1.0 - p.decrement * (t / p.duration_s).min(1.0)) * (1.0 + 0.04 * gauss(rng));
        cycles.push((t, period, amp.max(0.05)));
        t += period;
        for _ in hold_after.iter().filter(|&&h| h == k) {
            t += rng.random_range(0.5..0.9) / p.rate_hz.sqrt();
        }
    }
    let closed = p.closed;
    move |time: f64| match cycles.iter().rev().find(|c| c.0 <= time) {
        Some(&(start, period, amp)) if time < start + period => {
            closed + amp * (0.5 - 0.5 * (2.0 * PI * (time - start) / period).cos())
        }
        _ => closed,
    }
}

/// Neutral open-hand layout in hand-size units, y grows upwards.
fn neutral_hand() -> Vec<Point3> {
    let mut pts: Vec<Point3> = (0..HAND_POINTS)
        .map(|i| {
            let finger = (i.max(1) - 1) / 4;
            let joint = (i.max(1) - 1) % 4;
            [-0.3 + 0.2 * finger as f64, 0.6 + 0.25 * joint as f64, 0.0]
        })
        .collect();
    pts[motor::WRIST] = [0.0, 0.0, 0.0];
    pts[motor::MIDDLE_MCP] = [0.0, 1.0, 0.0];
    pts
}

pub fn tapping_track(p: &TapParams, rng: &mut impl Rng) -> LandmarkTrack {
    let aperture = tapping_aperture(p, rng);
    let place = Placement::sample(rng, 0.12..0.25);
    let base = neutral_hand();
    let thumb = [-0.45, 0.9, 0.0];
    let dir = [0.6, 0.8];
    let noise = Normal::new(0.0, 0.003).unwrap();
    let n = (p.duration_s * HAND_FPS).round() as usize + 1;
    let frames = (0..n)
        .map(|k| {
            let t = k as f64 / HAND_FPS;
            let a = aperture(t);
            let mut pts = base.clone();
            pts[motor::THUMB_TIP] = thumb;
            pts[motor::INDEX_TIP] = [thumb[0] + a * dir[0], thumb[1] + a * dir[1], 0.0];
            let points = pts
                .iter()
                .map(|q| place.apply([q[0] + noise.sample(rng), q[1] + noise.sample(rng), q[2]]))
                .collect();
            LandmarkFrame { t: round_to(t, 4), points, aus: None }
        })
        .collect();
    LandmarkTrack::new(TrackKind::Hand, frames, HAND_FPS).expect("valid hand track")
}

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("sample {index}: {detail}")]
    Extraction { index: usize, detail: String },
    #[error(transparent)]
    Learn(#[from] LearnError),
}

/// Labels alternate 0/1 so both classes are always present.
fn binary_label(i: usize) -> bool {
    i % 2 == 1
}

pub fn speech_cohort(n: usize, seed: u64) -> Result<Dataset, SynthError> {
    let mut rng = rng_for(seed);
    let mut vectors = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let affected = binary_label(i);
        let p = VoiceParams::sample(&mut rng, affected);
        let clip = voice_clip(&p, &mut rng);
        let fv = speech::extract_speech_features(&clip)
            .map_err(|e| SynthError::Extraction { index: i, detail: e.to_string() })?;
        vectors.push(fv);
        labels.push(affected as u8 as f64);
    }
    Ok(Dataset::from_vectors(&vectors, labels, TaskType::BinaryClass)?)
}

pub fn face_tracks(p: &FaceParams, rng: &mut impl Rng) -> BTreeMap<TaskKind, LandmarkTrack> {
    TaskKind::FACE.iter().map(|&t| (t, expression_track(t, p, rng))).collect()
}

pub fn face_cohort(n: usize, seed: u64) -> Result<Dataset, SynthError> {
    let mut rng = rng_for(seed);
    let mut vectors = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let affected = binary_label(i);
        let p = FaceParams::sample(&mut rng, affected);
        let fv = face::extract_face_features(&face_tracks(&p, &mut rng))
            .map_err(|e| SynthError::Extraction { index: i, detail: e.to_string() })?;
        vectors.push(fv);
        labels.push(affected as u8 as f64);
    }
    Ok(Dataset::from_vectors(&vectors, labels, TaskType::BinaryClass)?)
}

/// One hand per sample, labelled with an integer severity 0–4.
pub fn motor_cohort(n: usize, seed: u64) -> Result<Dataset, SynthError> {
    let mut rng = rng_for(seed);
    let mut vectors: Vec<FeatureVector> = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let level = (i % 5) as f64;
        let latent = level + rng.random_range(-0.4..0.4);
        let p = TapParams::for_severity(latent, &mut rng);
        let track = tapping_track(&p, &mut rng);
        let fv = motor::aperture(&track)
            .and_then(|sig| motor::extract_motor_features(&sig))
            .map_err(|e| SynthError::Extraction { index: i, detail: e.to_string() })?;
        vectors.push(fv);
        labels.push(level);
    }
    Ok(Dataset::from_vectors(&vectors, labels, TaskType::Regression)?)
}

/// Artifact bytes for all six tasks of one synthetic participant.
pub fn session_artifacts(seed: u64, affected: bool, motor_severity: f64) -> BTreeMap<TaskKind, Vec<u8>> {
    let mut rng = rng_for(seed);
    let mut out = BTreeMap::new();
    let voice = VoiceParams::sample(&mut rng, affected);
    out.insert(TaskKind::Speech, write_wav(&voice_clip(&voice, &mut rng)));
    let face_p = FaceParams::sample(&mut rng, affected);
    for (task, track) in face_tracks(&face_p, &mut rng) {
        out.insert(task, track.to_ljsonl().into_bytes());
    }
    for task in TaskKind::MOTOR {
        let p = TapParams::for_severity(motor_severity, &mut rng);
        out.insert(task, tapping_track(&p, &mut rng).to_ljsonl().into_bytes());
    }
    out
}
