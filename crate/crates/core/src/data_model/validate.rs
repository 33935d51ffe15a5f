use std::collections::BTreeMap;

use serde::Serialize;

use super::{load_embeddings, load_landmarks_with, DatasetManifest, EmbeddingKind, LandmarkOptions};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationEntry {
    /// `None` for dataset-wide checks.
    pub video_id: Option<String>,
    pub check: String,
    pub ok: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub dataset: String,
    pub entries: Vec<ValidationEntry>,
}

impl ValidationReport {
    pub fn failures(&self) -> impl Iterator<Item = &ValidationEntry> {
        self.entries.iter().filter(|e| !e.ok)
    }

    pub fn is_ok(&self) -> bool {
        self.failures().next().is_none()
    }

    fn push(&mut self, video_id: Option<&str>, check: &str, result: Result<String, String>) {
        let (ok, detail) = match result {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        self.entries.push(ValidationEntry {
            video_id: video_id.map(str::to_string),
            check: check.into(),
            ok,
            detail,
        });
    }
}

/// Check every file the manifest references. Never fails; problems become
/// report entries.
pub fn validate_dataset(manifest: &DatasetManifest, confidence_threshold: f64) -> ValidationReport {
    let mut report = ValidationReport { dataset: manifest.name.clone(), entries: Vec::new() };
    // kind -> first (video, dim) seen
    let mut dims: BTreeMap<EmbeddingKind, (String, usize)> = BTreeMap::new();

    for v in &manifest.videos {
        let id = v.video_id.as_str();
        match manifest.landmark_path(id) {
            None => report.push(Some(id), "landmarks", Err("no landmark file listed".into())),
            Some(path) => {
                let opts = LandmarkOptions {
                    confidence_threshold,
                    fps: v.fps.unwrap_or(30.0),
                    video_id: Some(id.into()),
                };
                let r = load_landmarks_with(&path, &opts)
                    .map(|t| format!("{} frames, {} hands retained", t.frames.len(), t.observations().count()))
                    .map_err(|e| e.to_string());
                report.push(Some(id), "landmarks", r);
            }
        }

        let Some(kinds) = manifest.embedding_paths.get(id) else { continue };
        for (&kind, rel) in kinds {
            let path = manifest.resolve(rel);
            let check = format!("embedding:{kind}");
            match load_embeddings(&path, Some(kind)) {
                Err(e) => report.push(Some(id), &check, Err(e.to_string())),
                Ok(m) => {
                    report.push(Some(id), &check, Ok(format!("{} x {}", m.len(), m.dim)));
                    check_dim(&mut report, &mut dims, kind, id, m.dim);
                }
            }
        }
    }

    for (prompt, rel) in &manifest.text_embedding_paths {
        let path = manifest.resolve(rel);
        match load_embeddings(&path, Some(EmbeddingKind::Text)) {
            Err(e) => report.push(None, &format!("text_embedding:{prompt}"), Err(e.to_string())),
            Ok(m) => {
                report.push(None, &format!("text_embedding:{prompt}"), Ok(format!("{} x {}", m.len(), m.dim)));
                check_dim(&mut report, &mut dims, EmbeddingKind::Text, prompt, m.dim);
            }
        }
    }
    report
}

fn check_dim(
    report: &mut ValidationReport,
    dims: &mut BTreeMap<EmbeddingKind, (String, usize)>,
    kind: EmbeddingKind,
    owner: &str,
    dim: usize,
) {
    match dims.get(&kind) {
        None => {
            dims.insert(kind, (owner.to_string(), dim));
        }
        Some((first, d)) if *d != dim => report.push(
            Some(owner),
            &format!("dimension:{kind}"),
            Err(format!("dim {dim} differs from {d} of `{first}`")),
        ),
        Some(_) => {}
    }
}
