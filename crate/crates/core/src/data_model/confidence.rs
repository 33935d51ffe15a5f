use serde::Serialize;

use super::{DataError, LandmarkTrack};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VideoConfidence {
    pub video_id: String,
    pub mean: f64,
    pub observations: usize,
}

/// Mean palm-detection confidence pooled over every retained hand observation
/// of every track.
pub fn mean_hand_confidence(tracks: &[LandmarkTrack]) -> Result<f64, DataError> {
    let (sum, n) = tracks
        .iter()
        .flat_map(|t| t.observations())
        .fold((0.0f64, 0usize), |(s, n), h| (s + h.confidence, n + 1));
    if n == 0 {
        return Err(DataError::EmptyInput);
    }
    Ok(sum / n as f64)
}

/// Per-video means, sorted by video id. Tracks without any retained hand are omitted.
pub fn per_video_confidence(tracks: &[LandmarkTrack]) -> Vec<VideoConfidence> {
    let mut out: Vec<VideoConfidence> = tracks
        .iter()
        .filter_map(|t| {
            let n = t.observations().count();
            (n > 0).then(|| VideoConfidence {
                video_id: t.video_id.clone(),
                mean: t.observations().map(|h| h.confidence).sum::<f64>() / n as f64,
                observations: n,
            })
        })
        .collect();
    out.sort_by(|a, b| a.video_id.cmp(&b.video_id));
    out
}
