//! On-disk dataset layout and the in-memory types every metric consumes.
//!
//! A dataset is described by a JSON manifest that catalogs videos (real or
//! synthetic, with their generation condition) and points at per-video
//! landmark tracks and embedding files. Loaders validate invariants eagerly so
//! the metric modules can assume well-formed input.

mod confidence;
mod embeddings;
mod landmarks;
mod manifest;
mod validate;

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use confidence::{mean_hand_confidence, per_video_confidence, VideoConfidence};
pub use embeddings::{load_embeddings, write_embeddings, write_embeddings_csv, EmbeddingSidecar};
pub use landmarks::{load_landmarks, load_landmarks_with, write_landmarks, LandmarkOptions};
pub use manifest::{load_manifest, save_manifest};
pub use validate::{validate_dataset, ValidationEntry, ValidationReport};

/// Number of landmarks in a hand skeleton.
pub const LANDMARK_COUNT: usize = 21;

/// Hands scoring below this palm-detection confidence are dropped at load time.
pub const DEFAULT_CONFIDENCE_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),
    #[error("i/o error on {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("schema violation in `{field}`: {reason}")]
    SchemaViolation { field: String, reason: String },
    #[error("duplicate video_id `{0}`")]
    DuplicateVideoId(String),
    #[error("`{key}` is referenced by {table} but has no matching entry")]
    DanglingReference { table: &'static str, key: String },
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: frame_index/timestamp not strictly increasing")]
    NonMonotonicFrames { line: usize },
    #[error("line {line}: hand has {count} landmarks, expected 21")]
    WrongLandmarkCount { line: usize, count: usize },
    #[error("sidecar mismatch: {0}")]
    SidecarMismatch(String),
    #[error("non-finite value at row {row}, column {col}")]
    NonFiniteValue { row: usize, col: usize },
    #[error("no hand observations retained")]
    EmptyInput,
}

/// One landmark position in normalized image coordinates, with relative depth.
///
/// Serialized as a bare `[x, y, z]` array.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct LandmarkPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl LandmarkPoint {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn sub(&self, other: &Self) -> [f64; 3] {
        [self.x - other.x, self.y - other.y, self.z - other.z]
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for LandmarkPoint {
    fn from(v: [f64; 3]) -> Self {
        Self::new(v[0], v[1], v[2])
    }
}

impl From<LandmarkPoint> for [f64; 3] {
    fn from(p: LandmarkPoint) -> Self {
        p.to_array()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Handedness {
    Left,
    Right,
}

impl fmt::Display for Handedness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Handedness::Left => "left",
            Handedness::Right => "right",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandObservation {
    pub handedness: Handedness,
    pub confidence: f64,
    pub points: [LandmarkPoint; LANDMARK_COUNT],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame_index: u64,
    pub timestamp_s: f64,
    pub hands: Vec<HandObservation>,
}

impl FrameRecord {
    /// The most confident observation labeled with `handedness`.
    pub fn hand(&self, handedness: Handedness) -> Option<&HandObservation> {
        self.hands
            .iter()
            .filter(|h| h.handedness == handedness)
            .fold(None, |best: Option<&HandObservation>, h| match best {
                Some(b) if b.confidence >= h.confidence => Some(b),
                _ => Some(h),
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkTrack {
    pub video_id: String,
    pub fps: f64,
    pub frames: Vec<FrameRecord>,
}

impl LandmarkTrack {
    pub fn observations(&self) -> impl Iterator<Item = &HandObservation> {
        self.frames.iter().flat_map(|f| f.hands.iter())
    }

    /// Handedness with the higher mean confidence over the whole track.
    /// Ties go to the right hand; `None` when the track has no hands at all.
    pub fn dominant_hand(&self) -> Option<Handedness> {
        let mut sums = [(0.0f64, 0usize); 2];
        for h in self.observations() {
            let slot = &mut sums[h.handedness as usize];
            slot.0 += h.confidence;
            slot.1 += 1;
        }
        let mean = |(s, n): (f64, usize)| (n > 0).then(|| s / n as f64);
        match (mean(sums[0]), mean(sums[1])) {
            (None, None) => None,
            (Some(_), None) => Some(Handedness::Left),
            (None, Some(_)) => Some(Handedness::Right),
            (Some(l), Some(r)) => Some(if l > r { Handedness::Left } else { Handedness::Right }),
        }
    }
}

/// Which hand a per-hand computation should follow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HandSelector {
    /// The hand with the higher mean confidence in each track.
    #[default]
    MostConfident,
    Left,
    Right,
    /// Every retained hand. Computations that need a single trajectory
    /// (kinematics, pose embeddings) fall back to `MostConfident`.
    Both,
}

impl HandSelector {
    pub fn from_pointing_hand(hand: Option<Handedness>, fallback: HandSelector) -> Self {
        match hand {
            Some(Handedness::Left) => HandSelector::Left,
            Some(Handedness::Right) => HandSelector::Right,
            None => fallback,
        }
    }

    /// Resolve to a single handedness for `track`.
    pub fn resolve(self, track: &LandmarkTrack) -> Option<Handedness> {
        match self {
            HandSelector::Left => Some(Handedness::Left),
            HandSelector::Right => Some(Handedness::Right),
            HandSelector::MostConfident | HandSelector::Both => track.dominant_hand(),
        }
    }

    /// Hands of `frame` this selector admits, given the track-level resolution.
    pub fn hands_in(self, frame: &FrameRecord, resolved: Option<Handedness>) -> Vec<&HandObservation> {
        match (self, resolved) {
            (HandSelector::Both, _) => frame.hands.iter().collect(),
            (_, Some(h)) => frame.hand(h).into_iter().collect(),
            (_, None) => Vec::new(),
        }
    }
}

impl fmt::Display for HandSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HandSelector::MostConfident => "most_confident",
            HandSelector::Left => "left",
            HandSelector::Right => "right",
            HandSelector::Both => "both",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Real,
    Synthetic,
}

/// Generation condition (control factor) of a video.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Reference,
    StaticScene,
    NoisyScene,
    FastMotion,
    SlowMotion,
    DynamicShift,
    ColorShift,
}

impl Condition {
    pub const ALL: [Condition; 7] = [
        Condition::Reference,
        Condition::StaticScene,
        Condition::NoisyScene,
        Condition::FastMotion,
        Condition::SlowMotion,
        Condition::DynamicShift,
        Condition::ColorShift,
    ];

    pub const SYNTHETIC: [Condition; 6] = [
        Condition::StaticScene,
        Condition::NoisyScene,
        Condition::FastMotion,
        Condition::SlowMotion,
        Condition::DynamicShift,
        Condition::ColorShift,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Reference => "reference",
            Condition::StaticScene => "static_scene",
            Condition::NoisyScene => "noisy_scene",
            Condition::FastMotion => "fast_motion",
            Condition::SlowMotion => "slow_motion",
            Condition::DynamicShift => "dynamic_shift",
            Condition::ColorShift => "color_shift",
        }
    }

    /// Row label used in the report tables.
    pub fn label(self) -> &'static str {
        match self {
            Condition::Reference => "Ref",
            Condition::StaticScene => "Static Scene",
            Condition::NoisyScene => "Noisy Scene",
            Condition::FastMotion => "Fast Motion",
            Condition::SlowMotion => "Slow Motion",
            Condition::DynamicShift => "Dynamic Shift",
            Condition::ColorShift => "Color Shift",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Condition::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown condition `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VideoMeta {
    pub video_id: String,
    pub source: Source,
    pub condition: Condition,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_object: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_video_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_index: Option<u8>,
    /// Frame rate used to synthesize timestamps missing from the landmark file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fps: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingKind {
    FrameImage,
    Video,
    Text,
    Pose,
}

impl EmbeddingKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EmbeddingKind::FrameImage => "frame_image",
            EmbeddingKind::Video => "video",
            EmbeddingKind::Text => "text",
            EmbeddingKind::Pose => "pose",
        }
    }
}

impl fmt::Display for EmbeddingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Catalog of one dataset (real or synthetic).
///
/// Paths are stored as written in the manifest, relative to [`root`](Self::root).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub name: String,
    /// Which hand downstream per-hand metrics follow; unset means the most
    /// confident hand per track (and both hands for joint angles).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pointing_hand: Option<Handedness>,
    pub videos: Vec<VideoMeta>,
    #[serde(default)]
    pub landmark_paths: std::collections::BTreeMap<String, PathBuf>,
    /// `video_id -> kind -> path`.
    #[serde(default)]
    pub embedding_paths:
        std::collections::BTreeMap<String, std::collections::BTreeMap<EmbeddingKind, PathBuf>>,
    #[serde(default)]
    pub text_embedding_paths: std::collections::BTreeMap<String, PathBuf>,
    #[serde(skip)]
    pub root: PathBuf,
}

impl DatasetManifest {
    pub fn video(&self, video_id: &str) -> Option<&VideoMeta> {
        self.videos.iter().find(|v| v.video_id == video_id)
    }

    pub fn resolve(&self, rel: &std::path::Path) -> PathBuf {
        if rel.is_absolute() {
            rel.to_path_buf()
        } else {
            self.root.join(rel)
        }
    }

    pub fn landmark_path(&self, video_id: &str) -> Option<PathBuf> {
        self.landmark_paths.get(video_id).map(|p| self.resolve(p))
    }

    pub fn embedding_path(&self, video_id: &str, kind: EmbeddingKind) -> Option<PathBuf> {
        self.embedding_paths
            .get(video_id)
            .and_then(|m| m.get(&kind))
            .map(|p| self.resolve(p))
    }

    pub fn text_embedding_path(&self, prompt_id: &str) -> Option<PathBuf> {
        self.text_embedding_paths.get(prompt_id).map(|p| self.resolve(p))
    }
}

/// `N x D` matrix of 32-bit embeddings with one identifier per row.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub ids: Vec<String>,
    pub dim: usize,
    /// Row-major, `ids.len() * dim` values.
    pub rows: Vec<f32>,
    pub kind: EmbeddingKind,
}

impl EmbeddingMatrix {
    pub fn new(
        ids: Vec<String>,
        dim: usize,
        rows: Vec<f32>,
        kind: EmbeddingKind,
    ) -> Result<Self, DataError> {
        if dim == 0 {
            return Err(DataError::SchemaViolation {
                field: "dim".into(),
                reason: "must be positive".into(),
            });
        }
        if rows.len() != ids.len() * dim {
            return Err(DataError::SidecarMismatch(format!(
                "{} ids x {} dims needs {} values, got {}",
                ids.len(),
                dim,
                ids.len() * dim,
                rows.len()
            )));
        }
        if let Some(pos) = rows.iter().position(|v| !v.is_finite()) {
            return Err(DataError::NonFiniteValue { row: pos / dim, col: pos % dim });
        }
        Ok(Self { ids, dim, rows, kind })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_f64(&self, i: usize) -> Vec<f64> {
        self.row(i).iter().map(|&v| v as f64).collect()
    }

    /// Arithmetic mean of all rows, accumulated in f64.
    pub fn mean_row(&self) -> Vec<f64> {
        let mut acc = vec![0.0f64; self.dim];
        for i in 0..self.len() {
            for (a, &v) in acc.iter_mut().zip(self.row(i)) {
                *a += v as f64;
            }
        }
        let n = self.len().max(1) as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }

    /// Rows belonging to `video_id`: ids equal to it or of the form
    /// `<video_id>#<frame>`. A file with no such ids is taken to be dedicated
    /// to the video and returned whole.
    pub fn rows_for_video(&self, video_id: &str) -> EmbeddingMatrix {
        let prefix = format!("{video_id}#");
        let picked: Vec<usize> = (0..self.len())
            .filter(|&i| self.ids[i] == video_id || self.ids[i].starts_with(&prefix))
            .collect();
        if picked.is_empty() {
            return self.clone();
        }
        self.select(&picked)
    }

    pub fn select(&self, indices: &[usize]) -> EmbeddingMatrix {
        let mut rows = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            rows.extend_from_slice(self.row(i));
        }
        EmbeddingMatrix {
            ids: indices.iter().map(|&i| self.ids[i].clone()).collect(),
            dim: self.dim,
            rows,
            kind: self.kind,
        }
    }

    /// Stack matrices of equal dimension; `None` for an empty input.
    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a EmbeddingMatrix>) -> Option<Result<EmbeddingMatrix, DataError>> {
        let mut iter = parts.into_iter();
        let first = iter.next()?;
        let mut out = first.clone();
        for m in iter {
            if m.dim != out.dim {
                return Some(Err(DataError::SidecarMismatch(format!(
                    "cannot stack dims {} and {}",
                    out.dim, m.dim
                ))));
            }
            out.ids.extend(m.ids.iter().cloned());
            out.rows.extend_from_slice(&m.rows);
        }
        Some(Ok(out))
    }
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    pub fn hand(handedness: Handedness, confidence: f64, offset: f64) -> HandObservation {
        let mut points = [LandmarkPoint::default(); LANDMARK_COUNT];
        for (i, p) in points.iter_mut().enumerate() {
            *p = LandmarkPoint::new(offset + i as f64 * 0.01, 0.5 + i as f64 * 0.005, 0.0);
        }
        HandObservation { handedness, confidence, points }
    }

    pub fn track(video_id: &str, confidences: &[f64]) -> LandmarkTrack {
        LandmarkTrack {
            video_id: video_id.into(),
            fps: 30.0,
            frames: confidences
                .iter()
                .enumerate()
                .map(|(i, &c)| FrameRecord {
                    frame_index: i as u64,
                    timestamp_s: i as f64 / 30.0,
                    hands: vec![hand(Handedness::Right, c, 0.1)],
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;

    #[test]
    fn dominant_hand_prefers_higher_mean_confidence() {
        let mut t = track("v", &[0.6, 0.6]);
        t.frames[0].hands.push(hand(Handedness::Left, 0.9, 0.3));
        assert_eq!(t.dominant_hand(), Some(Handedness::Left));
        assert_eq!(HandSelector::Right.resolve(&t), Some(Handedness::Right));
        assert_eq!(HandSelector::Both.hands_in(&t.frames[0], None).len(), 2);
    }

    #[test]
    fn rows_for_video_filters_by_prefix() {
        let m = EmbeddingMatrix::new(
            vec!["a#0".into(), "b#0".into(), "a#5".into()],
            1,
            vec![1.0, 2.0, 3.0],
            EmbeddingKind::FrameImage,
        )
        .unwrap();
        let a = m.rows_for_video("a");
        assert_eq!(a.ids, vec!["a#0", "a#5"]);
        assert_eq!(a.rows, vec![1.0, 3.0]);
        // no ids for "c" -> whole file
        assert_eq!(m.rows_for_video("c").len(), 3);
    }

    #[test]
    fn condition_round_trips_through_str() {
        for c in Condition::ALL {
            assert_eq!(c.as_str().parse::<Condition>().unwrap(), c);
        }
    }
}
