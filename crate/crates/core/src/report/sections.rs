use std::collections::BTreeMap;

use serde::Serialize;

use super::inputs::Dataset;
use super::{Inputs, RunConfig, Section, Status};
use crate::data_model::{mean_hand_confidence, Condition, EmbeddingKind, EmbeddingMatrix, LandmarkTrack, Source, VideoMeta};
use crate::diversity::{
    condition_ellipse, cosine_distance_matrix, inter_intra_stats, mean_pose_embedding, tsne_from_distances, PairStats,
};
use crate::embedding_stats::{
    frechet_distance, gas, gaussian_summary, group_average, iso_gas_lines, video_alignment, AlignmentRecord, GasConfig,
    IsoGasLine,
};
use crate::hand_geometry::{compare_angle_distributions_with, DivergencePair};
use crate::kinematics::{summarize_kinematics, MeanStd};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetSide {
    Real,
    Synthetic,
}

impl DatasetSide {
    pub fn label(self) -> &'static str {
        match self {
            DatasetSide::Real => "Real",
            DatasetSide::Synthetic => "Synthetic",
        }
    }
}

struct Group<'a> {
    side: DatasetSide,
    condition: Condition,
    videos: Vec<&'a VideoMeta>,
}

/// The whole real dataset, then each synthetic condition present.
fn groups(inputs: &Inputs) -> Vec<Group<'_>> {
    let mut out = vec![Group {
        side: DatasetSide::Real,
        condition: Condition::Reference,
        videos: inputs.real.videos().collect(),
    }];
    for c in Condition::ALL {
        let videos: Vec<_> = inputs.synth.videos().filter(|v| v.condition == c).collect();
        if !videos.is_empty() {
            out.push(Group { side: DatasetSide::Synthetic, condition: c, videos });
        }
    }
    out
}

fn tracks_of(ds: &Dataset, videos: &[&VideoMeta]) -> Vec<LandmarkTrack> {
    videos.iter().filter_map(|v| ds.track(&v.video_id)).cloned().collect()
}

fn status_from(errors: Vec<String>) -> Status {
    if errors.is_empty() {
        Status::Ok
    } else {
        Status::failed(errors.join("; "))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table1Row {
    pub dataset: DatasetSide,
    pub condition: Condition,
    pub videos: usize,
    pub hand_confidence: Option<f64>,
    pub fid: Option<f64>,
    pub fvd: Option<f64>,
    pub clip_similarity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table1 {
    pub rows: Vec<Table1Row>,
    pub hand_confidence: Status,
    pub fid: Status,
    pub fvd: Status,
    pub clip_similarity: Status,
}

pub fn table1_section(inputs: &Inputs, cfg: &RunConfig) -> Table1 {
    let groups = groups(inputs);
    let mut rows: Vec<Table1Row> = groups
        .iter()
        .map(|g| Table1Row {
            dataset: g.side,
            condition: g.condition,
            videos: g.videos.len(),
            hand_confidence: None,
            fid: None,
            fvd: None,
            clip_similarity: None,
        })
        .collect();

    let mut conf_errors = Vec::new();
    for (row, g) in rows.iter_mut().zip(&groups) {
        let ds = if g.side == DatasetSide::Real { &inputs.real } else { &inputs.synth };
        match mean_hand_confidence(&tracks_of(ds, &g.videos)) {
            Ok(c) => row.hand_confidence = Some(c),
            Err(e) => conf_errors.push(format!("{}: {e}", g.condition)),
        }
    }

    let fid = frechet_column(inputs, cfg, &groups, EmbeddingKind::FrameImage, &mut rows, |r, v| r.fid = Some(v));
    let fvd = frechet_column(inputs, cfg, &groups, EmbeddingKind::Video, &mut rows, |r, v| r.fvd = Some(v));

    let clip_similarity = match alignment_records(inputs) {
        Err(status) => status,
        Ok((records, _)) => {
            let mut by_cond: BTreeMap<Condition, Vec<f64>> = BTreeMap::new();
            for (meta, rec, _) in &records {
                by_cond.entry(meta.condition).or_default().push(rec.vas);
            }
            for row in rows.iter_mut().filter(|r| r.dataset == DatasetSide::Synthetic) {
                row.clip_similarity = by_cond.get(&row.condition).and_then(|v| MeanStd::of(v)).map(|s| s.mean);
            }
            Status::Ok
        }
    };

    Table1 { rows, hand_confidence: status_from(conf_errors), fid, fvd, clip_similarity }
}

fn kind_matrices<'a>(ds: &'a Dataset, kind: EmbeddingKind, side: &str) -> Result<&'a BTreeMap<String, EmbeddingMatrix>, Status> {
    match ds.kind(kind) {
        None => Err(Status::skipped(format!("no {kind} embeddings in the {side} manifest"))),
        Some(Err(e)) => Err(Status::failed(e)),
        Some(Ok(m)) => Ok(m),
    }
}

/// Group id of an embedding row: synthetic rows collapse across the samples
/// of one prompt, keeping the frame suffix.
fn group_key(meta: &VideoMeta, row_id: &str) -> String {
    match (&meta.source, &meta.prompt_id) {
        (Source::Synthetic, Some(p)) => match row_id.strip_prefix(meta.video_id.as_str()) {
            Some(rest) => format!("{p}{rest}"),
            None => format!("{p}#{row_id}"),
        },
        _ => row_id.to_string(),
    }
}

fn stack(
    map: &BTreeMap<String, EmbeddingMatrix>,
    videos: &[&VideoMeta],
    group: bool,
) -> Result<Option<EmbeddingMatrix>, String> {
    let mut parts = Vec::new();
    let mut keys = BTreeMap::new();
    for v in videos {
        if let Some(m) = map.get(&v.video_id) {
            for id in &m.ids {
                keys.insert(id.clone(), group_key(v, id));
            }
            parts.push(m);
        }
    }
    let Some(stacked) = EmbeddingMatrix::concat(parts) else { return Ok(None) };
    let stacked = stacked.map_err(|e| e.to_string())?;
    if group {
        group_average(&stacked, &keys).map(Some).map_err(|e| e.to_string())
    } else {
        Ok(Some(stacked))
    }
}

fn frechet_column(
    inputs: &Inputs,
    cfg: &RunConfig,
    groups: &[Group<'_>],
    kind: EmbeddingKind,
    rows: &mut [Table1Row],
    set: impl Fn(&mut Table1Row, f64),
) -> Status {
    let real = match kind_matrices(&inputs.real, kind, "real") {
        Ok(m) => m,
        Err(s) => return s,
    };
    let synth = match kind_matrices(&inputs.synth, kind, "synthetic") {
        Ok(m) => m,
        Err(s) => return s,
    };
    let real_videos: Vec<&VideoMeta> = inputs.real.videos().collect();
    let real_summary = match stack(real, &real_videos, false)
        .and_then(|m| m.ok_or_else(|| "no real rows".to_string()))
        .and_then(|m| gaussian_summary(&m).map_err(|e| e.to_string()))
    {
        Ok(s) => s,
        Err(e) => return Status::failed(format!("real {kind}: {e}")),
    };
    let mut errors = Vec::new();
    for (row, g) in rows.iter_mut().zip(groups) {
        if g.side == DatasetSide::Real {
            continue;
        }
        let d = stack(synth, &g.videos, cfg.group_average).and_then(|m| {
            let m = m.ok_or_else(|| "no rows".to_string())?;
            let s = gaussian_summary(&m).map_err(|e| e.to_string())?;
            frechet_distance(&real_summary, &s).map_err(|e| e.to_string())
        });
        match d {
            Ok(v) => set(row, v),
            Err(e) => errors.push(format!("{} {kind}: {e}", g.condition)),
        }
    }
    status_from(errors)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KinematicsRow {
    pub dataset: DatasetSide,
    pub condition: Condition,
    pub videos: usize,
    pub velocity: MeanStd,
    pub acceleration: MeanStd,
    pub jerk: MeanStd,
}

pub fn kinematics_section(inputs: &Inputs, cfg: &RunConfig) -> (Section<Vec<KinematicsRow>>, Vec<String>) {
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    let mut warnings = Vec::new();
    for g in groups(inputs) {
        let ds = if g.side == DatasetSide::Real { &inputs.real } else { &inputs.synth };
        let tracks = tracks_of(ds, &g.videos);
        match summarize_kinematics(&tracks, ds.selector, cfg.aggregation) {
            Ok(s) => {
                for v in &s.per_video {
                    if v.jerk.is_none() {
                        warnings.push(format!("kinematics: `{}` too short for some derivative orders", v.video_id));
                    }
                }
                rows.push(KinematicsRow {
                    dataset: g.side,
                    condition: g.condition,
                    videos: tracks.len(),
                    velocity: s.velocity,
                    acceleration: s.acceleration,
                    jerk: s.jerk,
                });
            }
            Err(e) => errors.push(format!("{} {}: {e}", g.side.label(), g.condition)),
        }
    }
    (Section { status: status_from(errors), data: Some(rows) }, warnings)
}

pub fn table3_section(inputs: &Inputs, cfg: &RunConfig) -> Section<Vec<DivergencePair>> {
    match compare_angle_distributions_with(
        (&inputs.real.tracks, inputs.real.selector),
        (&inputs.synth.tracks, inputs.synth.selector),
        cfg.bins,
    ) {
        Ok(pairs) => Section::ok(pairs),
        Err(e) => Section::without_data(Status::failed(e)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GasValue {
    pub alpha: f64,
    pub gas: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlignmentRow {
    pub video_id: String,
    pub condition: Condition,
    /// Real video the VAS compares against, or `centroid`.
    pub reference: String,
    pub vas: f64,
    pub pas: f64,
    pub gas: Vec<GasValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlignmentData {
    pub rows: Vec<AlignmentRow>,
    pub iso_gas: Vec<IsoGasLine>,
}

type Aligned<'a> = (&'a VideoMeta, AlignmentRecord, String);

/// One record per synthetic video with frame and text embeddings.
fn alignment_records(inputs: &Inputs) -> Result<(Vec<Aligned<'_>>, Vec<String>), Status> {
    let real = kind_matrices(&inputs.real, EmbeddingKind::FrameImage, "real")?;
    let synth = kind_matrices(&inputs.synth, EmbeddingKind::FrameImage, "synthetic")?;
    let texts = match &inputs.synth.texts {
        Err(e) => return Err(Status::failed(e)),
        Ok(t) if t.is_empty() => return Err(Status::skipped("no text embeddings in the synthetic manifest")),
        Ok(t) => t,
    };
    let real_videos: Vec<&VideoMeta> = inputs.real.videos().collect();
    let centroid = stack(real, &real_videos, false)
        .map_err(Status::failed)?
        .ok_or_else(|| Status::skipped("real manifest has no frame embeddings"))?;

    let mut warnings = Vec::new();
    let mut out = Vec::new();
    for v in inputs.synth.videos() {
        let Some(frames) = synth.get(&v.video_id) else {
            warnings.push(format!("alignment: `{}` has no frame embeddings", v.video_id));
            continue;
        };
        let Some(text) = v.prompt_id.as_ref().and_then(|p| texts.get(p)) else {
            warnings.push(format!("alignment: `{}` has no text embedding", v.video_id));
            continue;
        };
        let paired = match &v.reference_video_id {
            Some(r) => Some(r.as_str()),
            None if v.source == Source::Real => Some(v.video_id.as_str()),
            None => None,
        };
        let (reference, label) = match paired.and_then(|r| real.get(r).map(|m| (m, r))) {
            Some((m, r)) => (m, r.to_string()),
            None => {
                if let Some(r) = paired {
                    warnings.push(format!("alignment: reference `{r}` of `{}` has no frames, using centroid", v.video_id));
                }
                (&centroid, "centroid".to_string())
            }
        };
        let rec = video_alignment(&v.video_id, frames, reference, text).map_err(Status::failed)?;
        out.push((v, rec, label));
    }
    if out.is_empty() {
        return Err(Status::skipped("no synthetic video has both frame and text embeddings"));
    }
    Ok((out, warnings))
}

pub fn alignment_section(inputs: &Inputs, cfg: &RunConfig) -> (Section<AlignmentData>, Vec<String>) {
    let (records, warnings) = match alignment_records(inputs) {
        Ok(r) => r,
        Err(status) => return (Section::without_data(status), Vec::new()),
    };
    let configs: Vec<GasConfig> = match cfg.alphas.iter().map(|&a| GasConfig::new(a)).collect() {
        Ok(c) => c,
        Err(e) => return (Section::without_data(Status::failed(e)), warnings),
    };
    let rows = records
        .iter()
        .map(|(meta, rec, reference)| AlignmentRow {
            video_id: rec.video_id.clone(),
            condition: meta.condition,
            reference: reference.clone(),
            vas: rec.vas,
            pas: rec.pas,
            gas: configs.iter().map(|&c| GasValue { alpha: c.alpha(), gas: gas(rec, c) }).collect(),
        })
        .collect();
    let plain: Vec<AlignmentRecord> = records.into_iter().map(|(_, r, _)| r).collect();
    match iso_gas_lines(&plain, &cfg.alphas) {
        Ok(iso_gas) => (Section::ok(AlignmentData { rows, iso_gas }), warnings),
        Err(e) => (Section { status: Status::failed(e), data: Some(AlignmentData { rows, iso_gas: Vec::new() }) }, warnings),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionRow {
    pub video_id: String,
    pub dataset: DatasetSide,
    pub condition: Condition,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EllipseRow {
    pub dataset: DatasetSide,
    pub condition: Condition,
    pub cx: f64,
    pub cy: f64,
    pub major: f64,
    pub minor: f64,
    pub angle_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiversityData {
    pub projection: Vec<ProjectionRow>,
    pub ellipses: Vec<EllipseRow>,
    pub distances: Vec<PairStats>,
    pub kl_initial: f64,
    pub kl_final: f64,
}

pub fn diversity_section(inputs: &Inputs, cfg: &RunConfig) -> (Section<DiversityData>, Vec<String>) {
    let mut warnings = Vec::new();
    let mut embeddings = Vec::new();
    let mut meta: Vec<(String, DatasetSide, Condition)> = Vec::new();
    let mut sides = vec![(DatasetSide::Synthetic, &inputs.synth, "synth")];
    if cfg.tsne_include_real {
        sides.insert(0, (DatasetSide::Real, &inputs.real, "real"));
    }
    for (side, ds, tag) in sides {
        for v in ds.videos() {
            let Some(t) = ds.track(&v.video_id) else { continue };
            match mean_pose_embedding(t, ds.selector) {
                Ok(mut e) => {
                    e.video_id = format!("{tag}:{}", v.video_id);
                    let condition = if side == DatasetSide::Real { Condition::Reference } else { v.condition };
                    meta.push((v.video_id.clone(), side, condition));
                    embeddings.push(e);
                }
                Err(e) => warnings.push(format!("diversity: {e}")),
            }
        }
    }
    let fail = |e: &dyn std::fmt::Display| Section::without_data(Status::failed(e));
    let m = match cosine_distance_matrix(&embeddings) {
        Ok(m) => m,
        Err(e) => return (fail(&e), warnings),
    };
    let labels: BTreeMap<String, Condition> =
        embeddings.iter().zip(&meta).map(|(e, (_, _, c))| (e.video_id.clone(), *c)).collect();
    let distances = match inter_intra_stats(&m, &labels) {
        Ok(d) => d,
        Err(e) => return (fail(&e), warnings),
    };
    let out = match tsne_from_distances(&m, &cfg.tsne) {
        Ok(o) => o,
        Err(e) => return (fail(&e), warnings),
    };
    for w in &out.warnings {
        warnings.push(format!(
            "t-SNE: bandwidth search for `{}` stopped at perplexity {:.4}",
            w.id, w.achieved_perplexity
        ));
    }
    let projection: Vec<ProjectionRow> = meta
        .iter()
        .zip(&out.points)
        .map(|((id, side, c), p)| ProjectionRow { video_id: id.clone(), dataset: *side, condition: *c, x: p[0], y: p[1] })
        .collect();

    let mut by_group: BTreeMap<(DatasetSide, Condition), Vec<[f64; 2]>> = BTreeMap::new();
    for r in &projection {
        by_group.entry((r.dataset, r.condition)).or_default().push([r.x, r.y]);
    }
    let mut ellipses = Vec::new();
    for ((side, c), pts) in by_group {
        match condition_ellipse(c, &pts) {
            Ok(e) => ellipses.push(EllipseRow {
                dataset: side,
                condition: c,
                cx: e.center[0],
                cy: e.center[1],
                major: e.major,
                minor: e.minor,
                angle_rad: e.angle_rad,
            }),
            Err(e) => warnings.push(format!("ellipse {} {c}: {e}", side.label())),
        }
    }
    let data = DiversityData { projection, ellipses, distances, kl_initial: out.kl_initial, kl_final: out.kl_final };
    (Section::ok(data), warnings)
}
