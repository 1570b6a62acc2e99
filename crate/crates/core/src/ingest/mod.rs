//! Parsing and validation of uploaded task artifacts.

mod track;
mod wav;

use thiserror::Error;

pub use track::{
    gap_fill, parse_track, LandmarkFrame, LandmarkTrack, Point3, TrackKind, DEFAULT_MAX_GAP_S, FACE_POINTS,
    HAND_POINTS,
};
pub use wav::{parse_wav, write_wav, AudioClip};

use crate::model::TaskKind;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IngestError {
    #[error("not a RIFF/WAVE file: {0}")]
    NotWav(String),
    #[error("unsupported audio encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("audio data chunk is empty")]
    EmptyAudio,
    #[error("invalid audio: {0}")]
    InvalidAudio(String),
    #[error("line {line}: {detail}")]
    MalformedLine { line: usize, detail: String },
    #[error("line {line}: expected {expected} points, found {found}")]
    WrongPointCount { line: usize, expected: usize, found: usize },
    #[error("line {0}: timestamp does not increase")]
    NonMonotonicTime(usize),
    #[error("track has {0} frames, at least 2 are required")]
    TooFewFrames(usize),
    #[error("invalid track: {0}")]
    InvalidTrack(String),
}

/// Landmark topology expected for a non-speech task.
pub fn track_kind_for(task: TaskKind) -> Option<TrackKind> {
    match task.modality() {
        crate::model::Modality::Speech => None,
        crate::model::Modality::Face => Some(TrackKind::Face),
        crate::model::Modality::Motor => Some(TrackKind::Hand),
    }
}

/// Validates raw upload bytes for `task` the same way analysis will read them.
pub fn validate_artifact(task: TaskKind, bytes: &[u8]) -> Result<(), IngestError> {
    match track_kind_for(task) {
        None => parse_wav(bytes).map(|_| ()),
        Some(kind) => {
            let text = std::str::from_utf8(bytes)
                .map_err(|e| IngestError::MalformedLine { line: 0, detail: format!("not UTF-8: {e}") })?;
            parse_track(text, kind).map(|_| ())
        }
    }
}
