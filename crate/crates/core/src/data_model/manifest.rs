use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use super::{Condition, DataError, DatasetManifest, Source};

/// Load and validate `manifest.json`. Relative paths inside are resolved
/// against the manifest's directory.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest, DataError> {
    let text = read_to_string(path)?;
    let mut manifest: DatasetManifest =
        serde_json::from_str(&text).map_err(|e| DataError::SchemaViolation {
            field: "manifest".into(),
            reason: e.to_string(),
        })?;
    manifest.root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    check_invariants(&manifest)?;
    Ok(manifest)
}

pub fn save_manifest(manifest: &DatasetManifest, path: &Path) -> Result<(), DataError> {
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    fs::write(path, text + "\n").map_err(|source| DataError::Io { path: path.into(), source })
}

pub(super) fn read_to_string(path: &Path) -> Result<String, DataError> {
    fs::read_to_string(path).map_err(|source| {
        if source.kind() == std::io::ErrorKind::NotFound {
            DataError::MissingFile(path.into())
        } else {
            DataError::Io { path: path.into(), source }
        }
    })
}

fn check_invariants(m: &DatasetManifest) -> Result<(), DataError> {
    let mut ids = BTreeSet::new();
    for v in &m.videos {
        if v.video_id.is_empty() {
            return Err(violation("videos.video_id", "must be non-empty"));
        }
        if !ids.insert(v.video_id.as_str()) {
            return Err(DataError::DuplicateVideoId(v.video_id.clone()));
        }
        match (v.source, v.condition) {
            (Source::Real, c) if c != Condition::Reference => {
                return Err(violation(
                    "videos.condition",
                    &format!("real video `{}` must have condition `reference`", v.video_id),
                ));
            }
            (Source::Synthetic, Condition::Reference) => {
                return Err(violation(
                    "videos.condition",
                    &format!("synthetic video `{}` cannot be `reference`", v.video_id),
                ));
            }
            _ => {}
        }
        if let Some(s) = v.sample_index {
            if s > 3 {
                return Err(violation(
                    "videos.sample_index",
                    &format!("`{}` has sample_index {s}, expected 0..=3", v.video_id),
                ));
            }
        }
        if let Some(fps) = v.fps {
            if !(fps.is_finite() && fps > 0.0) {
                return Err(violation("videos.fps", "must be positive"));
            }
        }
    }

    let mut samples: BTreeMap<(&str, u8), &str> = BTreeMap::new();
    for v in m.videos.iter().filter(|v| v.source == Source::Synthetic) {
        if let (Some(p), Some(s)) = (&v.prompt_id, v.sample_index) {
            if let Some(other) = samples.insert((p.as_str(), s), &v.video_id) {
                return Err(violation(
                    "videos.sample_index",
                    &format!("`{other}` and `{}` share prompt `{p}` sample {s}", v.video_id),
                ));
            }
        }
    }

    for key in m.landmark_paths.keys() {
        if !ids.contains(key.as_str()) {
            return Err(DataError::DanglingReference { table: "landmark_paths", key: key.clone() });
        }
    }
    for key in m.embedding_paths.keys() {
        if !ids.contains(key.as_str()) {
            return Err(DataError::DanglingReference { table: "embedding_paths", key: key.clone() });
        }
    }
    let prompts: BTreeSet<&str> = m.videos.iter().filter_map(|v| v.prompt_id.as_deref()).collect();
    for key in m.text_embedding_paths.keys() {
        if !prompts.contains(key.as_str()) {
            return Err(DataError::DanglingReference {
                table: "text_embedding_paths",
                key: key.clone(),
            });
        }
    }
    Ok(())
}

fn violation(field: &str, reason: &str) -> DataError {
    DataError::SchemaViolation { field: field.into(), reason: reason.into() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::EmbeddingKind;

    const VALID: &str = r#"{
        "name": "demo",
        "videos": [
            {"video_id": "r1", "source": "real", "condition": "reference"},
            {"video_id": "s1", "source": "synthetic", "condition": "fast_motion",
             "prompt_id": "fast_motion__cup", "target_object": "cup",
             "reference_video_id": "r1", "sample_index": 0}
        ],
        "landmark_paths": {"r1": "lm/r1.jsonl", "s1": "lm/s1.jsonl"},
        "embedding_paths": {"s1": {"frame_image": "emb/s1.json"}},
        "text_embedding_paths": {"fast_motion__cup": "emb/text.json"}
    }"#;

    fn write(dir: &tempfile::TempDir, body: &str) -> std::path::PathBuf {
        let p = dir.path().join("manifest.json");
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn loads_valid_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let m = load_manifest(&write(&dir, VALID)).unwrap();
        assert_eq!(m.videos.len(), 2);
        assert_eq!(m.landmark_path("r1").unwrap(), dir.path().join("lm/r1.jsonl"));
        assert_eq!(
            m.embedding_path("s1", EmbeddingKind::FrameImage).unwrap(),
            dir.path().join("emb/s1.json")
        );
    }

    #[test]
    fn round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let m = load_manifest(&write(&dir, VALID)).unwrap();
        let out = dir.path().join("again.json");
        save_manifest(&m, &out).unwrap();
        assert_eq!(load_manifest(&out).unwrap(), m);
    }

    #[test]
    fn rejects_duplicate_id() {
        let dir = tempfile::tempdir().unwrap();
        let body = r#"{"name":"d","videos":[
            {"video_id":"v1","source":"real","condition":"reference"},
            {"video_id":"v1","source":"real","condition":"reference"}]}"#;
        assert!(matches!(load_manifest(&write(&dir, body)), Err(DataError::DuplicateVideoId(id)) if id == "v1"));
    }

    #[test]
    fn rejects_dangling_landmark_path() {
        let dir = tempfile::tempdir().unwrap();
        let body = r#"{"name":"d","videos":[
            {"video_id":"v1","source":"real","condition":"reference"}],
            "landmark_paths":{"ghost":"x.jsonl"}}"#;
        assert!(matches!(
            load_manifest(&write(&dir, body)),
            Err(DataError::DanglingReference { key, .. }) if key == "ghost"
        ));
    }

    #[test]
    fn rejects_source_condition_mismatch_and_bad_samples() {
        let dir = tempfile::tempdir().unwrap();
        let body = r#"{"name":"d","videos":[
            {"video_id":"v1","source":"real","condition":"fast_motion"}]}"#;
        assert!(matches!(load_manifest(&write(&dir, body)), Err(DataError::SchemaViolation { .. })));
        let body = r#"{"name":"d","videos":[
            {"video_id":"a","source":"synthetic","condition":"fast_motion","prompt_id":"p","sample_index":1},
            {"video_id":"b","source":"synthetic","condition":"fast_motion","prompt_id":"p","sample_index":1}]}"#;
        assert!(matches!(load_manifest(&write(&dir, body)), Err(DataError::SchemaViolation { .. })));
    }

    #[test]
    fn missing_file_and_unknown_field() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_manifest(&dir.path().join("nope.json")),
            Err(DataError::MissingFile(_))
        ));
        let body = r#"{"name":"d","videos":[],"bogus":1}"#;
        assert!(matches!(load_manifest(&write(&dir, body)), Err(DataError::SchemaViolation { .. })));
    }
}
