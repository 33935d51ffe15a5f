use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::manifest::read_to_string;
use super::{
    DataError, FrameRecord, HandObservation, Handedness, LandmarkPoint, LandmarkTrack,
    DEFAULT_CONFIDENCE_THRESHOLD, LANDMARK_COUNT,
};

#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkOptions {
    pub confidence_threshold: f64,
    /// Used to synthesize `timestamp_s = frame_index / fps` when a line omits it.
    pub fps: f64,
    /// Defaults to the file stem.
    pub video_id: Option<String>,
}

impl Default for LandmarkOptions {
    fn default() -> Self {
        Self { confidence_threshold: DEFAULT_CONFIDENCE_THRESHOLD, fps: 30.0, video_id: None }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFrame {
    frame_index: u64,
    #[serde(default)]
    timestamp_s: Option<f64>,
    #[serde(default)]
    hands: Vec<RawHand>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHand {
    handedness: Handedness,
    confidence: f64,
    points: Vec<[f64; 3]>,
}

#[derive(Serialize)]
struct FrameLine<'a> {
    frame_index: u64,
    timestamp_s: f64,
    hands: &'a [HandObservation],
}

pub fn load_landmarks(path: &Path) -> Result<LandmarkTrack, DataError> {
    load_landmarks_with(path, &LandmarkOptions::default())
}

/// Parse a JSON-Lines landmark file. Hands under the confidence threshold are
/// dropped; frames left without hands are kept as gaps.
pub fn load_landmarks_with(path: &Path, opts: &LandmarkOptions) -> Result<LandmarkTrack, DataError> {
    if !(opts.fps.is_finite() && opts.fps > 0.0) {
        return Err(DataError::SchemaViolation { field: "fps".into(), reason: "must be positive".into() });
    }
    let text = read_to_string(path)?;
    let video_id = opts.video_id.clone().unwrap_or_else(|| {
        path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
    });

    let mut frames: Vec<FrameRecord> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawFrame = serde_json::from_str(line)
            .map_err(|e| DataError::MalformedLine { line: line_no, reason: e.to_string() })?;
        if raw.hands.len() > 2 {
            return Err(DataError::MalformedLine {
                line: line_no,
                reason: format!("{} hands, at most 2 allowed", raw.hands.len()),
            });
        }
        let timestamp_s = raw.timestamp_s.unwrap_or(raw.frame_index as f64 / opts.fps);
        if !(timestamp_s.is_finite() && timestamp_s >= 0.0) {
            return Err(DataError::MalformedLine {
                line: line_no,
                reason: "timestamp_s must be finite and non-negative".into(),
            });
        }
        if let Some(prev) = frames.last() {
            if raw.frame_index <= prev.frame_index || timestamp_s <= prev.timestamp_s {
                return Err(DataError::NonMonotonicFrames { line: line_no });
            }
        }

        let mut hands = Vec::with_capacity(raw.hands.len());
        for h in raw.hands {
            if h.points.len() != LANDMARK_COUNT {
                return Err(DataError::WrongLandmarkCount { line: line_no, count: h.points.len() });
            }
            if !(0.0..=1.0).contains(&h.confidence) {
                return Err(DataError::MalformedLine {
                    line: line_no,
                    reason: format!("confidence {} outside [0, 1]", h.confidence),
                });
            }
            if h.confidence < opts.confidence_threshold {
                continue;
            }
            let mut points = [LandmarkPoint::default(); LANDMARK_COUNT];
            for (dst, src) in points.iter_mut().zip(&h.points) {
                *dst = LandmarkPoint::from(*src);
            }
            hands.push(HandObservation { handedness: h.handedness, confidence: h.confidence, points });
        }
        frames.push(FrameRecord { frame_index: raw.frame_index, timestamp_s, hands });
    }

    if frames.is_empty() {
        return Err(DataError::MalformedLine { line: 0, reason: "file contains no frames".into() });
    }
    Ok(LandmarkTrack { video_id, fps: opts.fps, frames })
}

pub fn write_landmarks(track: &LandmarkTrack, path: &Path) -> Result<(), DataError> {
    let io = |source| DataError::Io { path: path.into(), source };
    let mut out = std::io::BufWriter::new(fs::File::create(path).map_err(io)?);
    for f in &track.frames {
        let line = FrameLine { frame_index: f.frame_index, timestamp_s: f.timestamp_s, hands: &f.hands };
        serde_json::to_writer(&mut out, &line).expect("frame serializes");
        out.write_all(b"\n").map_err(io)?;
    }
    out.flush().map_err(io)
}
