use serde::Serialize;

use super::StatsError;
use crate::data_model::EmbeddingMatrix;

const ZERO_NORM: f64 = 1e-12;

/// Per-video visual (VAS) and prompt (PAS) alignment, both cosine similarities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlignmentRecord {
    pub video_id: String,
    pub vas: f64,
    pub pas: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GasConfig {
    alpha: f64,
}

impl GasConfig {
    pub fn new(alpha: f64) -> Result<Self, StatsError> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(StatsError::InvalidAlpha(alpha));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64, StatsError> {
    if u.len() != v.len() {
        return Err(StatsError::DimensionMismatch(u.len(), v.len()));
    }
    let (mut dot, mut nu, mut nv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    let (nu, nv) = (nu.sqrt(), nv.sqrt());
    if nu <= ZERO_NORM || nv <= ZERO_NORM {
        return Err(StatsError::ZeroVector);
    }
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

/// VAS compares the mean synthetic frame embedding with the mean reference
/// frame embedding; PAS averages the per-frame similarity to the prompt's
/// text embedding.
pub fn video_alignment(
    video_id: &str,
    synth_frames: &EmbeddingMatrix,
    real_ref_frames: &EmbeddingMatrix,
    text: &[f64],
) -> Result<AlignmentRecord, StatsError> {
    if synth_frames.is_empty() || real_ref_frames.is_empty() {
        return Err(StatsError::EmptyFrames(video_id.to_string()));
    }
    if synth_frames.dim != real_ref_frames.dim {
        return Err(StatsError::DimensionMismatch(synth_frames.dim, real_ref_frames.dim));
    }
    if synth_frames.dim != text.len() {
        return Err(StatsError::DimensionMismatch(synth_frames.dim, text.len()));
    }
    let vas = cosine_similarity(&synth_frames.mean_row(), &real_ref_frames.mean_row())?;
    let mut pas = 0.0;
    for i in 0..synth_frames.len() {
        pas += cosine_similarity(&synth_frames.row_f64(i), text)?;
    }
    pas /= synth_frames.len() as f64;
    Ok(AlignmentRecord { video_id: video_id.to_string(), vas, pas })
}

/// Gesture alignment score: `α·PAS + (1−α)·VAS`.
pub fn gas(record: &AlignmentRecord, cfg: GasConfig) -> f64 {
    cfg.alpha * record.pas + (1.0 - cfg.alpha) * record.vas
}

/// Locus of (VAS, PAS) points sharing the mean GAS of a record set.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum IsoGasLine {
    /// `PAS = intercept + slope · VAS`, for α > 0.
    Sloped { alpha: f64, gas: f64, intercept: f64, slope: f64 },
    /// `VAS = vas`, for α = 0.
    Vertical { alpha: f64, gas: f64, vas: f64 },
}

impl IsoGasLine {
    pub fn alpha(&self) -> f64 {
        match *self {
            IsoGasLine::Sloped { alpha, .. } | IsoGasLine::Vertical { alpha, .. } => alpha,
        }
    }

    pub fn gas(&self) -> f64 {
        match *self {
            IsoGasLine::Sloped { gas, .. } | IsoGasLine::Vertical { gas, .. } => gas,
        }
    }

    /// PAS on the line at `vas`; `None` for the vertical form.
    pub fn pas_at(&self, vas: f64) -> Option<f64> {
        match *self {
            IsoGasLine::Sloped { intercept, slope, .. } => Some(intercept + slope * vas),
            IsoGasLine::Vertical { .. } => None,
        }
    }
}

pub fn iso_gas_lines(records: &[AlignmentRecord], alphas: &[f64]) -> Result<Vec<IsoGasLine>, StatsError> {
    if records.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    alphas
        .iter()
        .map(|&alpha| {
            let cfg = GasConfig::new(alpha)?;
            let g = records.iter().map(|r| gas(r, cfg)).sum::<f64>() / records.len() as f64;
            Ok(if alpha == 0.0 {
                IsoGasLine::Vertical { alpha, gas: g, vas: g }
            } else {
                IsoGasLine::Sloped { alpha, gas: g, intercept: g / alpha, slope: -(1.0 - alpha) / alpha }
            })
        })
        .collect()
}
