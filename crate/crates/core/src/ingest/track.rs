//! Landmark tracks in the `.ljsonl` format: one JSON object per line,
//! `{"t": seconds, "points": [[x, y, z], ...], "aus": {"AU12": 1.3, ...}}`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::IngestError;

/// MediaPipe Hands topology.
pub const HAND_POINTS: usize = 21;
/// MediaPipe FaceMesh topology.
pub const FACE_POINTS: usize = 468;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackKind {
    Hand,
    Face,
}

impl TrackKind {
    pub fn point_count(self) -> usize {
        match self {
            TrackKind::Hand => HAND_POINTS,
            TrackKind::Face => FACE_POINTS,
        }
    }
}

pub type Point3 = [f64; 3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkFrame {
    pub t: f64,
    pub points: Vec<Point3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aus: Option<BTreeMap<String, f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkTrack {
    pub kind: TrackKind,
    pub frames: Vec<LandmarkFrame>,
    pub nominal_fps: f64,
    /// Indices of frames that start a new segment after an unfilled gap.
    #[serde(default)]
    pub segment_starts: Vec<usize>,
}

impl LandmarkTrack {
    /// Checks point counts, time ordering and the frame-count minimum.
    pub fn new(kind: TrackKind, frames: Vec<LandmarkFrame>, nominal_fps: f64) -> Result<Self, IngestError> {
        for (i, f) in frames.iter().enumerate() {
            if f.points.len() != kind.point_count() {
                return Err(IngestError::WrongPointCount {
                    line: i + 1,
                    expected: kind.point_count(),
                    found: f.points.len(),
                });
            }
            if i > 0 && f.t <= frames[i - 1].t {
                return Err(IngestError::NonMonotonicTime(i + 1));
            }
        }
        if frames.len() < 2 {
            return Err(IngestError::TooFewFrames(frames.len()));
        }
        if !(nominal_fps.is_finite() && nominal_fps > 0.0) {
            return Err(IngestError::InvalidTrack(format!("nominal fps {nominal_fps}")));
        }
        Ok(LandmarkTrack { kind, frames, nominal_fps, segment_starts: Vec::new() })
    }

    pub fn duration_s(&self) -> f64 {
        self.frames.last().map_or(0.0, |l| l.t) - self.frames.first().map_or(0.0, |f| f.t)
    }

    /// Applies `f` to every coordinate of every landmark.
    pub fn map_points(&self, f: impl Fn(Point3) -> Point3) -> LandmarkTrack {
        let mut out = self.clone();
        for frame in &mut out.frames {
            for p in &mut frame.points {
                *p = f(*p);
            }
        }
        out
    }

    /// Renders the track back to `.ljsonl`.
    pub fn to_ljsonl(&self) -> String {
        let mut out = String::new();
        for frame in &self.frames {
            out.push_str(&serde_json::to_string(frame).expect("frames always serialize"));
            out.push('\n');
        }
        out
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFrame {
    t: f64,
    points: Vec<Vec<f64>>,
    #[serde(default)]
    aus: Option<BTreeMap<String, f64>>,
}

fn is_au_code(key: &str) -> bool {
    key.len() == 4 && key.starts_with("AU") && key[2..].bytes().all(|b| b.is_ascii_digit())
}

fn parse_line(line: &str, line_no: usize, kind: TrackKind) -> Result<LandmarkFrame, IngestError> {
    let malformed = |why: String| IngestError::MalformedLine { line: line_no, detail: why };
    let raw: RawFrame = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
    if !(raw.t.is_finite() && raw.t >= 0.0) {
        return Err(malformed(format!("timestamp {} must be >= 0", raw.t)));
    }
    if raw.points.len() != kind.point_count() {
        return Err(IngestError::WrongPointCount {
            line: line_no,
            expected: kind.point_count(),
            found: raw.points.len(),
        });
    }
    let points = raw
        .points
        .iter()
        .map(|p| match p.as_slice() {
            [x, y] => Ok([*x, *y, 0.0]),
            [x, y, z] => Ok([*x, *y, *z]),
            _ => Err(malformed(format!("point with {} coordinates", p.len()))),
        })
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(aus) = &raw.aus {
        if kind == TrackKind::Hand {
            return Err(malformed("hand frames carry no action units".into()));
        }
        for (k, v) in aus {
            if !is_au_code(k) {
                return Err(malformed(format!("action unit key {k:?}")));
            }
            if !(v.is_finite() && *v >= 0.0) {
                return Err(malformed(format!("{k} intensity {v} must be >= 0")));
            }
        }
    }
    Ok(LandmarkFrame { t: raw.t, points, aus: raw.aus })
}

/// Parses a `.ljsonl` track. Blank lines are ignored; line numbers in errors
/// are 1-based.
pub fn parse_track(text: &str, kind: TrackKind) -> Result<LandmarkTrack, IngestError> {
    let mut frames: Vec<LandmarkFrame> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let frame = parse_line(line, idx + 1, kind)?;
        if let Some(prev) = frames.last() {
            if frame.t <= prev.t {
                return Err(IngestError::NonMonotonicTime(idx + 1));
            }
        }
        frames.push(frame);
    }
    if frames.len() < 2 {
        return Err(IngestError::TooFewFrames(frames.len()));
    }
    let span = frames[frames.len() - 1].t - frames[0].t;
    let fps = (frames.len() - 1) as f64 / span;
    LandmarkTrack::new(kind, frames, fps)
}

pub const DEFAULT_MAX_GAP_S: f64 = 0.2;

fn lerp_frame(a: &LandmarkFrame, b: &LandmarkFrame, w: f64, t: f64) -> LandmarkFrame {
    let points = a
        .points
        .iter()
        .zip(&b.points)
        .map(|(p, q)| [0, 1, 2].map(|k| p[k] + w * (q[k] - p[k])))
        .collect();
    let aus = match (&a.aus, &b.aus) {
        (Some(x), Some(y)) => Some(
            x.iter()
                .filter_map(|(k, va)| y.get(k).map(|vb| (k.clone(), va + w * (vb - va))))
                .collect(),
        ),
        _ => None,
    };
    LandmarkFrame { t, points, aus }
}

/// Fills short dropouts by linear interpolation at the track's nominal rate.
///
/// A step of `dt` between consecutive frames is missing `round(dt * fps) - 1`
/// frames; those are inserted evenly when `dt <= max_gap_s`. Longer gaps are
/// left alone and recorded in `segment_starts`.
pub fn gap_fill(track: &LandmarkTrack, max_gap_s: f64) -> LandmarkTrack {
    let fps = track.nominal_fps;
    let mut frames = Vec::with_capacity(track.frames.len());
    let mut segment_starts = Vec::new();
    frames.push(track.frames[0].clone());
    for pair in track.frames.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let dt = b.t - a.t;
        if dt > max_gap_s {
            segment_starts.push(frames.len());
        } else {
            let missing = ((dt * fps).round() as i64 - 1).max(0) as usize;
            for j in 1..=missing {
                let w = j as f64 / (missing + 1) as f64;
                frames.push(lerp_frame(a, b, w, a.t + w * dt));
            }
        }
        frames.push(b.clone());
    }
    LandmarkTrack { kind: track.kind, frames, nominal_fps: fps, segment_starts }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hand_line(t: f64, n: usize) -> String {
        let pts: Vec<String> = (0..n).map(|i| format!("[{}.0,0.5,0.0]", i)).collect();
        format!("{{\"t\":{t},\"points\":[{}]}}", pts.join(","))
    }

    fn hand_frame(t: f64, v: f64) -> LandmarkFrame {
        LandmarkFrame { t, points: vec![[v, 2.0 * v, 0.0]; HAND_POINTS], aus: None }
    }

    #[test]
    fn two_frames_give_fps_from_span() {
        let text = format!("{}\n{}\n", hand_line(0.0, 21), hand_line(0.033, 21));
        let track = parse_track(&text, TrackKind::Hand).unwrap();
        assert_eq!(track.frames.len(), 2);
        assert!((track.nominal_fps - 1.0 / 0.033).abs() < 1e-9);
        assert!((track.nominal_fps - 30.3).abs() < 0.05);
    }

    #[test]
    fn wrong_point_count() {
        let text = format!("{}\n{}\n", hand_line(0.0, 21), hand_line(0.1, 20));
        assert_eq!(
            parse_track(&text, TrackKind::Hand),
            Err(IngestError::WrongPointCount { line: 2, expected: 21, found: 20 })
        );
    }

    #[test]
    fn repeated_timestamp() {
        let text = format!("{}\n{}\n", hand_line(0.0, 21), hand_line(0.0, 21));
        assert_eq!(parse_track(&text, TrackKind::Hand), Err(IngestError::NonMonotonicTime(2)));
    }

    #[test]
    fn malformed_and_short_inputs() {
        assert!(matches!(
            parse_track("{\"t\": 0.0, \"points\": ", TrackKind::Hand),
            Err(IngestError::MalformedLine { line: 1, .. })
        ));
        assert_eq!(parse_track(&hand_line(0.0, 21), TrackKind::Hand), Err(IngestError::TooFewFrames(1)));
        assert_eq!(parse_track("\n\n", TrackKind::Hand), Err(IngestError::TooFewFrames(0)));
        let bad_au = format!(
            "{}\n",
            hand_line(0.0, 468).replace("]]}", "]],\"aus\":{\"AU12\":-1.0}}")
        );
        assert!(matches!(
            parse_track(&bad_au, TrackKind::Face),
            Err(IngestError::MalformedLine { line: 1, .. })
        ));
    }

    #[test]
    fn midpoint_is_inserted() {
        let track = LandmarkTrack::new(TrackKind::Hand, vec![hand_frame(0.0, 1.0), hand_frame(0.1, 3.0)], 20.0).unwrap();
        let filled = gap_fill(&track, 0.2);
        assert_eq!(filled.frames.len(), 3);
        assert!((filled.frames[1].t - 0.05).abs() < 1e-12);
        assert_eq!(filled.frames[1].points[0], [2.0, 4.0, 0.0]);
        assert!(filled.segment_starts.is_empty());
    }

    #[test]
    fn long_gap_becomes_segment_boundary() {
        let track = LandmarkTrack::new(TrackKind::Hand, vec![hand_frame(0.0, 1.0), hand_frame(1.0, 3.0)], 20.0).unwrap();
        let filled = gap_fill(&track, 0.2);
        assert_eq!(filled.frames, track.frames);
        assert_eq!(filled.segment_starts, vec![1]);
    }

    #[test]
    fn gapless_track_is_unchanged() {
        let frames: Vec<_> = (0..10).map(|i| hand_frame(i as f64 / 30.0, i as f64)).collect();
        let track = LandmarkTrack::new(TrackKind::Hand, frames, 30.0).unwrap();
        assert_eq!(gap_fill(&track, 0.2), track);
    }

    proptest! {
        #[test]
        fn gap_fill_is_idempotent(steps in proptest::collection::vec(0.01f64..0.6, 1..30)) {
            let mut t = 0.0;
            let mut frames = vec![hand_frame(0.0, 0.0)];
            for (i, s) in steps.iter().enumerate() {
                t += s;
                frames.push(hand_frame(t, i as f64));
            }
            let track = LandmarkTrack::new(TrackKind::Hand, frames, 30.0).unwrap();
            let once = gap_fill(&track, 0.2);
            let twice = gap_fill(&once, 0.2);
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn parse_never_yields_an_invalid_track(
            lines in proptest::collection::vec(
                prop_oneof![
                    (0.0f64..5.0).prop_map(|t| hand_line(t, 21)),
                    (0.0f64..5.0).prop_map(|t| hand_line(t, 20)),
                    Just("{\"t\":-1,\"points\":[]}".to_string()),
                    Just("garbage".to_string()),
                    Just(String::new()),
                ],
                0..12,
            )
        ) {
            if let Ok(track) = parse_track(&lines.join("\n"), TrackKind::Hand) {
                prop_assert!(track.frames.len() >= 2);
                prop_assert!(track.frames.windows(2).all(|w| w[0].t < w[1].t));
                prop_assert!(track.frames.iter().all(|f| f.points.len() == HAND_POINTS));
                prop_assert!(track.nominal_fps.is_finite() && track.nominal_fps > 0.0);
            }
        }
    }
}
