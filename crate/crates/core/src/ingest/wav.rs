//! RIFF/WAVE PCM16 reading and writing.

use serde::{Deserialize, Serialize};

use super::IngestError;

const FORMAT_PCM: u16 = 1;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

/// Mono audio, samples in [-1, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate_hz: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self, IngestError> {
        if sample_rate_hz == 0 {
            return Err(IngestError::InvalidAudio("sample rate must be positive".into()));
        }
        if samples.is_empty() {
            return Err(IngestError::EmptyAudio);
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite() || s.abs() > 1.0) {
            return Err(IngestError::InvalidAudio(format!(
                "sample {i} is {} (must be finite, within [-1, 1])",
                samples[i]
            )));
        }
        Ok(AudioClip { samples, sample_rate_hz })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    /// Sub-clip over `range` (sample indices).
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<AudioClip, IngestError> {
        AudioClip::new(self.samples[range].to_vec(), self.sample_rate_hz)
    }

    /// Multiplies every sample by `gain`; fails if the result leaves [-1, 1].
    pub fn scaled(&self, gain: f64) -> Result<AudioClip, IngestError> {
        AudioClip::new(self.samples.iter().map(|s| s * gain).collect(), self.sample_rate_hz)
    }
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

struct Format {
    channels: u16,
    sample_rate: u32,
    bits: u16,
}

fn parse_fmt(body: &[u8]) -> Result<Format, IngestError> {
    if body.len() < 16 {
        return Err(IngestError::NotWav("fmt chunk shorter than 16 bytes".into()));
    }
    let mut tag = u16_at(body, 0);
    let channels = u16_at(body, 2);
    let sample_rate = u32_at(body, 4);
    let bits = u16_at(body, 14);
    if tag == FORMAT_EXTENSIBLE {
        // cbSize(2) validBits(2) channelMask(4) then the sub-format GUID whose
        // first two bytes carry the real format tag.
        if body.len() < 26 {
            return Err(IngestError::NotWav("truncated WAVE_FORMAT_EXTENSIBLE header".into()));
        }
        tag = u16_at(body, 24);
    }
    if tag != FORMAT_PCM || bits != 16 {
        return Err(IngestError::UnsupportedEncoding(format!(
            "format tag {tag}, {bits} bits per sample; only 16-bit PCM is accepted"
        )));
    }
    if channels != 1 && channels != 2 {
        return Err(IngestError::UnsupportedEncoding(format!("{channels} channels")));
    }
    if sample_rate == 0 {
        return Err(IngestError::NotWav("sample rate is zero".into()));
    }
    Ok(Format { channels, sample_rate, bits })
}

/// Parses a RIFF/WAVE PCM16 file into a mono clip.
///
/// Samples are divided by 32768; stereo frames are averaged.
pub fn parse_wav(bytes: &[u8]) -> Result<AudioClip, IngestError> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(IngestError::NotWav("missing RIFF/WAVE signature".into()));
    }
    let mut format = None;
    let mut data = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let len = u32_at(bytes, pos + 4) as usize;
        let start = pos + 8;
        let end = start.checked_add(len).filter(|&e| e <= bytes.len());
        match id {
            b"fmt " => {
                let end = end.ok_or_else(|| IngestError::NotWav("truncated fmt chunk".into()))?;
                format = Some(parse_fmt(&bytes[start..end])?);
            }
            b"data" => {
                // Streaming writers sometimes leave the size field too large;
                // take what is actually there.
                data = Some(&bytes[start..end.unwrap_or(bytes.len())]);
                break;
            }
            _ => {}
        }
        pos = start.saturating_add(len).saturating_add(len & 1);
    }
    let format = format.ok_or_else(|| IngestError::NotWav("no fmt chunk".into()))?;
    let data = data.ok_or_else(|| IngestError::NotWav("no data chunk".into()))?;
    debug_assert_eq!(format.bits, 16);

    let channels = format.channels as usize;
    let frame_bytes = 2 * channels;
    let n_frames = data.len() / frame_bytes;
    if n_frames == 0 {
        return Err(IngestError::EmptyAudio);
    }
    let samples = data
        .chunks_exact(frame_bytes)
        .map(|frame| {
            let sum: f64 = frame
                .chunks_exact(2)
                .map(|s| i16::from_le_bytes([s[0], s[1]]) as f64 / 32768.0)
                .sum();
            sum / channels as f64
        })
        .collect();
    AudioClip::new(samples, format.sample_rate)
}

/// Encodes a clip as a canonical 44-byte-header mono PCM16 file.
pub fn write_wav(clip: &AudioClip) -> Vec<u8> {
    let n = clip.samples.len();
    let data_len = (2 * n) as u32;
    let mut out = Vec::with_capacity(44 + 2 * n);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&clip.sample_rate_hz.to_le_bytes());
    out.extend_from_slice(&(clip.sample_rate_hz * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in &clip.samples {
        let q = (s * 32768.0).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    out
}
