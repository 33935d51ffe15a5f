//! Deterministic demo datasets in the on-disk layout the loaders expect.
//!
//! The real set holds one reference video per (participant, object); the
//! synthetic set holds every (object, condition, sample). Hands follow a
//! parametric skeleton moved along an eased reach, and embeddings are
//! low-dimensional vectors clustered by object and condition.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data_model::{
    save_manifest, write_embeddings, write_landmarks, Condition, DataError, DatasetManifest, EmbeddingKind,
    EmbeddingMatrix, FrameRecord, HandObservation, Handedness, LandmarkPoint, LandmarkTrack, Source, VideoMeta,
    LANDMARK_COUNT,
};
use crate::prompt_forge::{prompt_id, slug};

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureOptions {
    pub seed: u64,
    pub objects: Vec<String>,
    pub participants: usize,
    pub samples: u8,
    pub frames: usize,
    pub fps: f64,
    /// Keep every `frame_stride`-th frame for frame embeddings.
    pub frame_stride: usize,
    pub frame_dim: usize,
    pub video_dim: usize,
    pub with_embeddings: bool,
}

impl Default for FixtureOptions {
    fn default() -> Self {
        Self {
            seed: 7,
            objects: vec!["red cup".into(), "power drill".into()],
            participants: 6,
            samples: 4,
            frames: 40,
            fps: 30.0,
            frame_stride: 4,
            frame_dim: 8,
            video_dim: 6,
            with_embeddings: true,
        }
    }
}

/// Paths of the two manifests written by [`write_fixture_set`].
#[derive(Debug, Clone)]
pub struct FixturePaths {
    pub real: PathBuf,
    pub synth: PathBuf,
}

#[derive(Debug, Clone, Copy)]
struct Motion {
    /// Fraction of the clip spent reaching.
    reach: f64,
    jitter: f64,
    /// Horizontal drift per frame, as from a moving camera.
    pan: f64,
    /// Extra flexion of the pointing finger, radians.
    index_flex: f64,
}

fn motion(condition: Condition) -> Motion {
    let base = Motion { reach: 0.5, jitter: 0.0015, pan: 0.0, index_flex: 0.15 };
    match condition {
        Condition::Reference | Condition::StaticScene | Condition::ColorShift => base,
        Condition::NoisyScene => Motion { jitter: 0.003, ..base },
        Condition::FastMotion => Motion { reach: 0.25, index_flex: 0.1, ..base },
        Condition::SlowMotion => Motion { reach: 0.9, ..base },
        Condition::DynamicShift => Motion { pan: 0.002, ..base },
    }
}

/// Landmarks of a pointing hand with the wrist at the origin, palm in the
/// image plane, fingers toward -y.
fn skeleton(index_flex: f64, curl: f64, spread: f64) -> [[f64; 3]; LANDMARK_COUNT] {
    let mut pts = [[0.0; 3]; LANDMARK_COUNT];
    let chain = |pts: &mut [[f64; 3]; LANDMARK_COUNT], first: usize, base: [f64; 3], dir: f64, lens: &[f64], flex: &[f64]| {
        let mut p = base;
        let mut bend = 0.0;
        pts[first] = p;
        for (k, (&len, &f)) in lens.iter().zip(flex).enumerate() {
            bend += f;
            let inplane = bend.cos() * len;
            p = [p[0] + dir.sin() * inplane, p[1] - dir.cos() * inplane, p[2] - bend.sin() * len];
            pts[first + k + 1] = p;
        }
    };
    // Thumb: CMC at 1, tip at 4.
    chain(&mut pts, 1, [-0.02, -0.015, 0.0], -0.9 - spread, &[0.025, 0.022, 0.018], &[0.3, 0.35 + curl * 0.3, 0.3]);
    let bases = [[-0.015, -0.06, 0.0], [0.0, -0.062, 0.0], [0.015, -0.058, 0.0], [0.028, -0.052, 0.0]];
    let dirs = [-0.12 - spread, 0.0, 0.1 + spread, 0.22 + spread];
    for f in 0..4 {
        let first = 5 + 4 * f;
        let (flex, lens) = if f == 0 {
            ([index_flex, index_flex * 0.8, index_flex * 0.6], [0.03, 0.022, 0.018])
        } else {
            ([1.2 + curl, 1.4 + curl, 0.9 + curl * 0.5], [0.028, 0.02, 0.016])
        };
        chain(&mut pts, first, bases[f], dirs[f], &lens, &flex);
    }
    pts
}

struct VideoStyle {
    target: [f64; 2],
    rest: [f64; 2],
    scale: f64,
    roll: f64,
    curl: f64,
    spread: f64,
    confidence: f64,
}

fn make_track(
    video_id: &str,
    style: &VideoStyle,
    m: Motion,
    opts: &FixtureOptions,
    rng: &mut ChaCha8Rng,
) -> LandmarkTrack {
    let noise = Normal::new(0.0, m.jitter).expect("valid sd");
    let conf_noise = Normal::new(0.0, 0.03).expect("valid sd");
    let n = opts.frames;
    let mut frames = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / (n - 1) as f64;
        let s = 0.5 - 0.5 * (PI * (t / m.reach).min(1.0)).cos();
        let wrist = [
            style.rest[0] + s * (style.target[0] - style.rest[0]) + m.pan * i as f64,
            style.rest[1] + s * (style.target[1] - style.rest[1]),
        ];
        // The hand opens into the point as the reach completes.
        let sk = skeleton(m.index_flex + (1.0 - s) * 0.5, style.curl, style.spread);
        let roll = style.roll + (1.0 - s) * 0.4;
        let (c, sn) = (roll.cos(), roll.sin());
        let mut points = [LandmarkPoint::default(); LANDMARK_COUNT];
        for (k, q) in sk.iter().enumerate() {
            let (x, y) = (q[0] * style.scale, q[1] * style.scale);
            points[k] = LandmarkPoint::new(
                quantize(wrist[0] + c * x - sn * y + noise.sample(rng), 1e5),
                quantize(wrist[1] + sn * x + c * y + noise.sample(rng), 1e5),
                quantize(q[2] * style.scale + noise.sample(rng), 1e5),
            );
        }
        let confidence = quantize((style.confidence + conf_noise.sample(rng)).clamp(0.55, 0.99), 1e3);
        let mut hands = vec![HandObservation { handedness: Handedness::Right, confidence, points }];
        // An occasional spurious low-confidence detection; dropped at load.
        if i % 9 == 4 {
            let mut ghost = points;
            for p in ghost.iter_mut() {
                p.x = 1.0 - p.x;
            }
            hands.push(HandObservation { handedness: Handedness::Left, confidence: 0.3, points: ghost });
        }
        frames.push(FrameRecord { frame_index: i as u64, timestamp_s: i as f64 / opts.fps, hands });
    }
    LandmarkTrack { video_id: video_id.into(), fps: opts.fps, frames }
}

/// Round to a grid of `1 / per_unit`, keeping the files small.
fn quantize(v: f64, per_unit: f64) -> f64 {
    (v * per_unit).round() / per_unit
}

fn gaussian_vec(rng: &mut ChaCha8Rng, dim: usize, sd: f64) -> Vec<f64> {
    let n = Normal::new(0.0, sd).expect("valid sd");
    (0..dim).map(|_| n.sample(rng)).collect()
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

#[derive(Default)]
struct Rows {
    ids: Vec<String>,
    values: Vec<f32>,
}

impl Rows {
    fn push(&mut self, id: String, v: &[f64]) {
        self.ids.push(id);
        self.values.extend(v.iter().map(|&x| x as f32));
    }

    fn write(self, dim: usize, kind: EmbeddingKind, path: &Path) -> Result<(), DataError> {
        write_embeddings(&EmbeddingMatrix::new(self.ids, dim, self.values, kind)?, path)
    }
}

struct Space {
    objects: BTreeMap<String, (Vec<f64>, Vec<f64>)>,
    conditions: BTreeMap<Condition, (Vec<f64>, Vec<f64>)>,
}

struct Writer<'a> {
    opts: &'a FixtureOptions,
    dir: PathBuf,
    manifest: DatasetManifest,
    frames: Rows,
    videos: Rows,
    texts: Rows,
}

impl<'a> Writer<'a> {
    fn new(opts: &'a FixtureOptions, dir: PathBuf, name: &str) -> Result<Self, DataError> {
        for sub in ["landmarks", "embeddings"] {
            let p = dir.join(sub);
            std::fs::create_dir_all(&p).map_err(|source| DataError::Io { path: p, source })?;
        }
        Ok(Self {
            opts,
            manifest: DatasetManifest {
                name: name.into(),
                pointing_hand: None,
                videos: Vec::new(),
                landmark_paths: BTreeMap::new(),
                embedding_paths: BTreeMap::new(),
                text_embedding_paths: BTreeMap::new(),
                root: dir.clone(),
            },
            dir,
            frames: Rows::default(),
            videos: Rows::default(),
            texts: Rows::default(),
        })
    }

    fn add_video(
        &mut self,
        meta: VideoMeta,
        track: &LandmarkTrack,
        frame_center: &[f64],
        video_center: &[f64],
        rng: &mut ChaCha8Rng,
    ) -> Result<(), DataError> {
        let id = meta.video_id.clone();
        let rel = PathBuf::from("landmarks").join(format!("{id}.jsonl"));
        write_landmarks(track, &self.dir.join(&rel))?;
        self.manifest.landmark_paths.insert(id.clone(), rel);
        if self.opts.with_embeddings {
            let drift = gaussian_vec(rng, self.opts.frame_dim, 0.05);
            for f in (0..self.opts.frames).step_by(self.opts.frame_stride) {
                let phase = f as f64 / self.opts.frames as f64;
                let v: Vec<f64> = frame_center
                    .iter()
                    .zip(&drift)
                    .zip(gaussian_vec(rng, self.opts.frame_dim, 0.04))
                    .map(|((c, d), e)| c + d * phase + e)
                    .collect();
                self.frames.push(format!("{id}#{f}"), &v);
            }
            self.videos.push(id.clone(), &add(video_center, &gaussian_vec(rng, self.opts.video_dim, 0.05)));
            let kinds = self.manifest.embedding_paths.entry(id).or_default();
            kinds.insert(EmbeddingKind::FrameImage, "embeddings/frames.json".into());
            kinds.insert(EmbeddingKind::Video, "embeddings/video.json".into());
        }
        self.manifest.videos.push(meta);
        Ok(())
    }

    fn add_text(&mut self, prompt: &str, v: &[f64]) {
        if self.opts.with_embeddings && !self.manifest.text_embedding_paths.contains_key(prompt) {
            self.texts.push(prompt.into(), v);
            self.manifest.text_embedding_paths.insert(prompt.into(), "embeddings/text.json".into());
        }
    }

    fn finish(self) -> Result<PathBuf, DataError> {
        if self.opts.with_embeddings {
            let e = self.dir.join("embeddings");
            self.frames.write(self.opts.frame_dim, EmbeddingKind::FrameImage, &e.join("frames.json"))?;
            self.videos.write(self.opts.video_dim, EmbeddingKind::Video, &e.join("video.json"))?;
            self.texts.write(self.opts.frame_dim, EmbeddingKind::Text, &e.join("text.json"))?;
        }
        let path = self.dir.join("manifest.json");
        save_manifest(&self.manifest, &path)?;
        Ok(path)
    }
}

/// Write `real/` and `synth/` datasets under `dir`.
pub fn write_fixture_set(dir: &Path, opts: &FixtureOptions) -> Result<FixturePaths, DataError> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut space = Space { objects: BTreeMap::new(), conditions: BTreeMap::new() };
    for o in &opts.objects {
        let frame = add(&vec![1.0; opts.frame_dim], &gaussian_vec(&mut rng, opts.frame_dim, 0.5));
        let video = add(&vec![1.0; opts.video_dim], &gaussian_vec(&mut rng, opts.video_dim, 0.5));
        space.objects.insert(o.clone(), (frame, video));
    }
    for c in Condition::ALL {
        let sd = if c == Condition::Reference { 0.0 } else { 0.15 };
        space.conditions.insert(c, (gaussian_vec(&mut rng, opts.frame_dim, sd), gaussian_vec(&mut rng, opts.video_dim, sd)));
    }
    let text_offset = gaussian_vec(&mut rng, opts.frame_dim, 0.6);

    let mut real = Writer::new(opts, dir.join("real"), "fixture-real")?;
    let mut styles: BTreeMap<String, Vec<(String, VideoStyle)>> = BTreeMap::new();
    for p in 0..opts.participants {
        for (k, o) in opts.objects.iter().enumerate() {
            let id = format!("p{:02}_{}", p + 1, slug(o));
            let style = VideoStyle {
                target: [0.3 + 0.35 * k as f64 + rng.random_range(-0.03..0.03), 0.42 + rng.random_range(-0.03..0.03)],
                rest: [0.55 + rng.random_range(-0.05..0.05), 0.85],
                scale: 1.6 + rng.random_range(-0.15..0.15),
                roll: rng.random_range(-0.25..0.25),
                curl: rng.random_range(-0.15..0.15),
                spread: rng.random_range(-0.05..0.05),
                confidence: 0.74 + rng.random_range(-0.04..0.04),
            };
            let track = make_track(&id, &style, motion(Condition::Reference), opts, &mut rng);
            let prompt = prompt_id(Condition::Reference, o);
            let (fc, vc) = &space.objects[o];
            real.add_video(
                VideoMeta {
                    video_id: id.clone(),
                    source: Source::Real,
                    condition: Condition::Reference,
                    prompt_id: Some(prompt.clone()),
                    target_object: Some(o.clone()),
                    reference_video_id: None,
                    sample_index: None,
                    fps: Some(opts.fps),
                },
                &track,
                fc,
                vc,
                &mut rng,
            )?;
            real.add_text(&prompt, &add(fc, &text_offset));
            styles.entry(o.clone()).or_default().push((id, style));
        }
    }
    let real_path = real.finish()?;

    let mut synth = Writer::new(opts, dir.join("synth"), "fixture-synth")?;
    for o in &opts.objects {
        let (reference, base) = &styles[o][0];
        for c in Condition::SYNTHETIC {
            let prompt = prompt_id(c, o);
            let (fc, vc) = &space.objects[o];
            let (cf, cv) = &space.conditions[&c];
            let (fc, vc) = (add(fc, cf), add(vc, cv));
            for s in 0..opts.samples {
                let id = format!("{prompt}__s{s}");
                let style = VideoStyle {
                    target: [base.target[0] + rng.random_range(-0.02..0.02), base.target[1] + rng.random_range(-0.02..0.02)],
                    rest: base.rest,
                    scale: base.scale * (1.0 + rng.random_range(-0.05..0.05)),
                    roll: base.roll + rng.random_range(-0.1..0.1),
                    curl: base.curl + rng.random_range(-0.1..0.1),
                    spread: base.spread,
                    confidence: base.confidence + 0.02,
                };
                let track = make_track(&id, &style, motion(c), opts, &mut rng);
                synth.add_video(
                    VideoMeta {
                        video_id: id,
                        source: Source::Synthetic,
                        condition: c,
                        prompt_id: Some(prompt.clone()),
                        target_object: Some(o.clone()),
                        reference_video_id: Some(reference.clone()),
                        sample_index: Some(s),
                        fps: Some(opts.fps),
                    },
                    &track,
                    &fc,
                    &vc,
                    &mut rng,
                )?;
            }
            synth.add_text(&prompt, &add(&fc, &text_offset));
        }
    }
    let synth_path = synth.finish()?;
    Ok(FixturePaths { real: real_path, synth: synth_path })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::{load_manifest, validate_dataset};
    use crate::hand_geometry::{extract_joint_angles, CANONICAL_JOINTS};
    use crate::data_model::HandSelector;

    #[test]
    fn skeleton_joints_are_well_defined() {
        let sk = skeleton(0.15, 0.0, 0.0);
        let track = LandmarkTrack {
            video_id: "x".into(),
            fps: 30.0,
            frames: vec![FrameRecord {
                frame_index: 0,
                timestamp_s: 0.0,
                hands: vec![HandObservation {
                    handedness: Handedness::Right,
                    confidence: 0.9,
                    points: sk.map(|q| LandmarkPoint::new(q[0], q[1], q[2])),
                }],
            }],
        };
        for j in &CANONICAL_JOINTS {
            let a = extract_joint_angles(std::slice::from_ref(&track), j, HandSelector::MostConfident).unwrap();
            assert_eq!(a.degenerate, 0, "{j}");
            assert!(a.angles[0] > 20.0, "{j}: {}", a.angles[0]);
        }
    }

    #[test]
    fn fixture_set_validates() {
        let dir = tempfile::tempdir().unwrap();
        let paths = write_fixture_set(dir.path(), &FixtureOptions::default()).unwrap();
        for p in [&paths.real, &paths.synth] {
            let m = load_manifest(p).unwrap();
            let r = validate_dataset(&m, 0.5);
            assert!(r.is_ok(), "{:?}", r.failures().collect::<Vec<_>>());
        }
        assert_eq!(load_manifest(&paths.real).unwrap().videos.len(), 12);
        assert_eq!(load_manifest(&paths.synth).unwrap().videos.len(), 48);
    }
}
