//! Four-block generation prompts, per-condition presets and generation job
//! manifests.
//!
//! A prompt has participant, pose, environment and camera blocks. The pose
//! block names the target through the `{object_name}` placeholder. Jobs are
//! written as a JSON array for whatever tool drives the video model.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data_model::Condition;

pub const PLACEHOLDER: &str = "{object_name}";
pub const DEFAULT_SAMPLES: u32 = 4;
pub const DEFAULT_DURATION_S: f64 = 8.0;

const DEFAULT_TEMPLATE: &str = include_str!("../templates/pointing_office.json");

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("pose template has no {PLACEHOLDER} placeholder")]
    MissingPlaceholder,
    #[error("{0} block is empty")]
    EmptyBlock(&'static str),
    #[error("object name is empty")]
    EmptyObjectName,
    #[error("no preset for condition `{0}`")]
    InvalidCondition(Condition),
    #[error("no start/end frames for `{object}` under `{condition}`")]
    MissingFrameRef { object: String, condition: Condition },
    #[error("invalid job options: {0}")]
    InvalidJob(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraSettings {
    pub style: String,
    pub shot_size: String,
    pub camera_angle: String,
    pub camera_movement: String,
    pub motion_level: String,
}

impl CameraSettings {
    fn lines(&self) -> [(&'static str, &str); 5] {
        [
            ("Style", &self.style),
            ("Shot Size", &self.shot_size),
            ("Camera Angle", &self.camera_angle),
            ("Camera Movement", &self.camera_movement),
            ("Motion Level", &self.motion_level),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptSpec {
    pub participant: String,
    pub pose_template: String,
    pub environment: String,
    pub camera: CameraSettings,
}

impl PromptSpec {
    /// The bundled office pointing template.
    pub fn default_template() -> Self {
        serde_json::from_str(DEFAULT_TEMPLATE).expect("bundled template is valid")
    }

    pub fn load(path: &Path) -> Result<Self, PromptError> {
        let text = std::fs::read_to_string(path).map_err(|source| PromptError::Io { path: path.into(), source })?;
        let spec: Self = serde_json::from_str(&text).map_err(|source| PromptError::Json { path: path.into(), source })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), PromptError> {
        for (name, text) in [
            ("participant", &self.participant),
            ("pose", &self.pose_template),
            ("environment", &self.environment),
        ] {
            if text.trim().is_empty() {
                return Err(PromptError::EmptyBlock(name));
            }
        }
        if self.camera.lines().iter().any(|(_, v)| v.trim().is_empty()) {
            return Err(PromptError::EmptyBlock("camera"));
        }
        if !self.pose_template.contains(PLACEHOLDER) {
            return Err(PromptError::MissingPlaceholder);
        }
        Ok(())
    }
}

pub const BLOCK_HEADERS: [&str; 4] =
    ["Participant Description:", "Pose Description:", "Environment Description:", "Camera Settings:"];

/// Substitute every placeholder occurrence. Text without placeholders is
/// returned unchanged.
pub fn fill_placeholder(text: &str, object_name: &str) -> String {
    text.replace(PLACEHOLDER, object_name)
}

pub fn compose_prompt(spec: &PromptSpec, object_name: &str) -> Result<String, PromptError> {
    spec.validate()?;
    let object_name = object_name.trim();
    if object_name.is_empty() {
        return Err(PromptError::EmptyObjectName);
    }
    let mut out = String::new();
    let blocks = [&spec.participant, &spec.pose_template, &spec.environment];
    for (header, body) in BLOCK_HEADERS.iter().zip(blocks) {
        let _ = write!(out, "{header}\n{}\n\n", fill_placeholder(body.trim(), object_name));
    }
    out.push_str(BLOCK_HEADERS[3]);
    for (key, value) in spec.camera.lines() {
        let _ = write!(out, "\n{key}: {}", fill_placeholder(value.trim(), object_name));
    }
    Ok(out)
}

/// Block overrides a condition applies on top of a base spec.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptDelta {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub environment: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub environment_suffix: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pose_suffix: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub camera_movement: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub motion_level: Option<String>,
}

impl PromptDelta {
    pub fn is_empty(&self) -> bool {
        *self == PromptDelta::default()
    }

    pub fn apply(&self, base: &PromptSpec) -> PromptSpec {
        let mut s = base.clone();
        if let Some(env) = &self.environment {
            s.environment = env.clone();
        }
        if let Some(suffix) = &self.environment_suffix {
            s.environment = format!("{} {suffix}", s.environment.trim_end());
        }
        if let Some(suffix) = &self.pose_suffix {
            s.pose_template = format!("{} {suffix}", s.pose_template.trim_end());
        }
        if let Some(m) = &self.camera_movement {
            s.camera.camera_movement = m.clone();
        }
        if let Some(m) = &self.motion_level {
            s.camera.motion_level = m.clone();
        }
        s
    }
}

pub fn condition_preset(condition: Condition) -> Result<PromptDelta, PromptError> {
    let some = |s: &str| Some(s.to_string());
    Ok(match condition {
        Condition::Reference => return Err(PromptError::InvalidCondition(condition)),
        Condition::StaticScene => PromptDelta::default(),
        Condition::NoisyScene => PromptDelta {
            environment: some(
                "The scene is set in a busy modern office. In the background, several people walk by \
                 and move around behind the table throughout the video, while computer monitors display data.",
            ),
            ..PromptDelta::default()
        },
        Condition::FastMotion => PromptDelta {
            pose_suffix: some("The arm moves to the pointing pose quickly, in a fast-forward manner."),
            motion_level: some("High"),
            ..PromptDelta::default()
        },
        Condition::SlowMotion => PromptDelta {
            pose_suffix: some("The arm moves to the pointing pose slowly and smoothly, in slow motion."),
            motion_level: some("Low"),
            ..PromptDelta::default()
        },
        Condition::DynamicShift => {
            PromptDelta { camera_movement: some("Tracking Shot"), ..PromptDelta::default() }
        }
        Condition::ColorShift => PromptDelta {
            environment_suffix: some(
                "The footage has a strong color grade with a warm tint, and the illumination shifts in hue over time.",
            ),
            ..PromptDelta::default()
        },
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FramePair {
    pub start: PathBuf,
    pub end: PathBuf,
}

pub type FrameRefs = BTreeMap<(String, Condition), FramePair>;

/// Look up `<dir>/<slug>/<condition>/{start,end}.png`, falling back to
/// `<dir>/<slug>/{start,end}.png`. Pairs with a missing file are left out.
pub fn scan_frame_refs(dir: &Path, objects: &[String], conditions: &[Condition]) -> FrameRefs {
    let mut refs = FrameRefs::new();
    for object in objects {
        let base = dir.join(slug(object));
        for &c in conditions {
            let pair = |d: PathBuf| {
                let p = FramePair { start: d.join("start.png"), end: d.join("end.png") };
                (p.start.is_file() && p.end.is_file()).then_some(p)
            };
            if let Some(p) = pair(base.join(c.as_str())).or_else(|| pair(base.clone())) {
                refs.insert((object.clone(), c), p);
            }
        }
    }
    refs
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JobOptions {
    pub samples: u32,
    pub duration_s: f64,
}

impl Default for JobOptions {
    fn default() -> Self {
        Self { samples: DEFAULT_SAMPLES, duration_s: DEFAULT_DURATION_S }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationJob {
    pub prompt_id: String,
    pub prompt_text: String,
    pub object_name: String,
    pub condition: Condition,
    pub start_frame_ref: PathBuf,
    pub end_frame_ref: PathBuf,
    pub samples: u32,
    pub duration_s: f64,
}

/// Lowercase ASCII alphanumerics joined by single underscores.
pub fn slug(text: &str) -> String {
    let mut out = String::new();
    for word in text.split(|c: char| !c.is_ascii_alphanumeric()).filter(|w| !w.is_empty()) {
        if !out.is_empty() {
            out.push('_');
        }
        out.push_str(&word.to_ascii_lowercase());
    }
    out
}

pub fn prompt_id(condition: Condition, object_name: &str) -> String {
    format!("{}__{}", condition.as_str(), slug(object_name))
}

/// One job per distinct `(object, condition)` prompt id, in input order.
pub fn emit_generation_jobs(
    spec: &PromptSpec,
    objects: &[String],
    conditions: &[Condition],
    frame_refs: &FrameRefs,
    opts: JobOptions,
) -> Result<Vec<GenerationJob>, PromptError> {
    if opts.samples == 0 {
        return Err(PromptError::InvalidJob("samples must be at least 1".into()));
    }
    if opts.duration_s.is_nan() || opts.duration_s <= 0.0 {
        return Err(PromptError::InvalidJob("duration_s must be positive".into()));
    }
    let mut seen = BTreeSet::new();
    let mut jobs = Vec::new();
    for object in objects {
        for &condition in conditions {
            let id = prompt_id(condition, object);
            if !seen.insert(id.clone()) {
                continue;
            }
            let frames = frame_refs
                .get(&(object.clone(), condition))
                .ok_or_else(|| PromptError::MissingFrameRef { object: object.clone(), condition })?;
            let prompt_text = compose_prompt(&condition_preset(condition)?.apply(spec), object)?;
            jobs.push(GenerationJob {
                prompt_id: id,
                prompt_text,
                object_name: object.trim().to_string(),
                condition,
                start_frame_ref: frames.start.clone(),
                end_frame_ref: frames.end.clone(),
                samples: opts.samples,
                duration_s: opts.duration_s,
            });
        }
    }
    Ok(jobs)
}

pub fn expected_videos(jobs: &[GenerationJob]) -> u64 {
    jobs.iter().map(|j| u64::from(j.samples)).sum()
}

pub fn write_jobs(jobs: &[GenerationJob], path: &Path) -> Result<(), PromptError> {
    let text = serde_json::to_string_pretty(jobs).map_err(|source| PromptError::Json { path: path.into(), source })?;
    std::fs::write(path, text + "\n").map_err(|source| PromptError::Io { path: path.into(), source })
}

pub fn read_jobs(path: &Path) -> Result<Vec<GenerationJob>, PromptError> {
    let text = std::fs::read_to_string(path).map_err(|source| PromptError::Io { path: path.into(), source })?;
    serde_json::from_str(&text).map_err(|source| PromptError::Json { path: path.into(), source })
}
