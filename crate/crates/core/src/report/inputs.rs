use std::collections::BTreeMap;
use std::path::PathBuf;

use super::{ReportError, RunConfig};
use crate::data_model::{
    load_embeddings, load_landmarks_with, load_manifest, DatasetManifest, EmbeddingKind, EmbeddingMatrix,
    HandSelector, LandmarkOptions, LandmarkTrack, VideoMeta,
};

/// Embeddings of one kind, per video id. `Err` holds a load failure message.
pub type KindEmbeddings = Result<BTreeMap<String, EmbeddingMatrix>, String>;

#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    /// Sorted by video id.
    pub tracks: Vec<LandmarkTrack>,
    pub selector: HandSelector,
    /// Only kinds at least one video lists.
    pub embeddings: BTreeMap<EmbeddingKind, KindEmbeddings>,
    /// Mean text embedding per prompt id.
    pub texts: Result<BTreeMap<String, Vec<f64>>, String>,
}

impl Dataset {
    pub fn videos(&self) -> impl Iterator<Item = &VideoMeta> {
        self.manifest.videos.iter()
    }

    pub fn track(&self, video_id: &str) -> Option<&LandmarkTrack> {
        self.tracks
            .binary_search_by(|t| t.video_id.as_str().cmp(video_id))
            .ok()
            .map(|i| &self.tracks[i])
    }

    pub fn kind(&self, kind: EmbeddingKind) -> Option<&KindEmbeddings> {
        self.embeddings.get(&kind)
    }
}

#[derive(Debug, Clone)]
pub struct Inputs {
    pub real: Dataset,
    pub synth: Dataset,
    pub warnings: Vec<String>,
}

pub fn load_inputs(cfg: &RunConfig) -> Result<Inputs, ReportError> {
    let mut warnings = Vec::new();
    let real = load_dataset(&cfg.real_manifest, cfg, None, &mut warnings)?;
    let synth = load_dataset(&cfg.synth_manifest, cfg, cfg.conditions.as_deref(), &mut warnings)?;
    Ok(Inputs { real, synth, warnings })
}

fn load_dataset(
    path: &std::path::Path,
    cfg: &RunConfig,
    filter: Option<&[crate::data_model::Condition]>,
    warnings: &mut Vec<String>,
) -> Result<Dataset, ReportError> {
    let data_err = |context: String| move |source| ReportError::Data { context, source };
    let mut manifest = load_manifest(path).map_err(data_err(format!("manifest {}", path.display())))?;
    if let Some(keep) = filter {
        manifest.videos.retain(|v| keep.contains(&v.condition));
    }

    let mut tracks = Vec::with_capacity(manifest.videos.len());
    for v in &manifest.videos {
        let Some(lpath) = manifest.landmark_path(&v.video_id) else {
            warnings.push(format!("{}: `{}` has no landmark file", manifest.name, v.video_id));
            continue;
        };
        let opts = LandmarkOptions {
            confidence_threshold: cfg.confidence_threshold,
            fps: v.fps.unwrap_or(30.0),
            video_id: Some(v.video_id.clone()),
        };
        let track = load_landmarks_with(&lpath, &opts).map_err(data_err(format!("landmarks of `{}`", v.video_id)))?;
        tracks.push(track);
    }
    tracks.sort_by(|a, b| a.video_id.cmp(&b.video_id));

    // Several videos may share one embedding file; read each file once.
    let mut cache: BTreeMap<(PathBuf, EmbeddingKind), Result<EmbeddingMatrix, String>> = BTreeMap::new();
    let mut embeddings: BTreeMap<EmbeddingKind, KindEmbeddings> = BTreeMap::new();
    for v in &manifest.videos {
        let Some(kinds) = manifest.embedding_paths.get(&v.video_id) else { continue };
        for (&kind, rel) in kinds {
            let full = manifest.resolve(rel);
            let loaded = cache
                .entry((full.clone(), kind))
                .or_insert_with(|| load_embeddings(&full, Some(kind)).map_err(|e| e.to_string()));
            let slot = embeddings.entry(kind).or_insert_with(|| Ok(BTreeMap::new()));
            match (slot, loaded) {
                (Ok(map), Ok(m)) => {
                    map.insert(v.video_id.clone(), qualified_rows(m, &v.video_id));
                }
                (slot @ Ok(_), Err(e)) => *slot = Err(format!("`{}`: {e}", v.video_id)),
                (Err(_), _) => {}
            }
        }
    }

    let mut texts = Ok(BTreeMap::new());
    for (prompt, rel) in &manifest.text_embedding_paths {
        let full = manifest.resolve(rel);
        match load_embeddings(&full, Some(EmbeddingKind::Text)) {
            Ok(m) => {
                if let Ok(t) = texts.as_mut() {
                    t.insert(prompt.clone(), m.rows_for_video(prompt).mean_row());
                }
            }
            Err(e) => {
                texts = Err(format!("text `{prompt}`: {e}"));
                break;
            }
        }
    }

    let selector = HandSelector::from_pointing_hand(manifest.pointing_hand, cfg.hand_selector);
    Ok(Dataset { manifest, tracks, selector, embeddings, texts })
}

/// Rows of `video_id`, with ids rewritten to `<video_id>` or `<video_id>#<suffix>`
/// so rows from different files never collide.
fn qualified_rows(m: &EmbeddingMatrix, video_id: &str) -> EmbeddingMatrix {
    let mut rows = m.rows_for_video(video_id);
    let prefix = format!("{video_id}#");
    for id in rows.ids.iter_mut() {
        if id != video_id && !id.starts_with(&prefix) {
            *id = format!("{prefix}{id}");
        }
    }
    rows
}
