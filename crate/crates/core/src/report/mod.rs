//! End-to-end evaluation of a synthetic dataset against a real one.
//!
//! [`run_full_report`] loads both manifests, computes every section and
//! writes table and plot-data files. Sections whose inputs are absent are
//! marked skipped; sections whose computation fails are marked failed and
//! the rest of the report is still produced.

mod emit;
mod inputs;
mod sections;

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data_model::{Condition, DataError, HandSelector};
use crate::diversity::TsneConfig;
use crate::kinematics::LandmarkAggregation;

pub use emit::{write_report, write_report_files, write_section_files, OutputFormat, FILE_NAMES};
pub use inputs::{load_inputs, Dataset, Inputs};
pub use sections::{
    alignment_section, diversity_section, kinematics_section, table1_section, table3_section, AlignmentData,
    AlignmentRow, DatasetSide, DiversityData, EllipseRow, GasValue, KinematicsRow, ProjectionRow, Table1,
    Table1Row,
};

pub const DEFAULT_ALPHAS: [f64; 4] = [0.1, 0.2, 0.4, 0.8];

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{context}: {source}")]
    Data {
        context: String,
        #[source]
        source: DataError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Serialize(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub real_manifest: PathBuf,
    pub synth_manifest: PathBuf,
    /// Synthetic conditions to keep; `None` keeps all.
    pub conditions: Option<Vec<Condition>>,
    pub alphas: Vec<f64>,
    pub bins: usize,
    pub confidence_threshold: f64,
    pub group_average: bool,
    /// Used when a manifest does not name the pointing hand.
    pub hand_selector: HandSelector,
    pub aggregation: LandmarkAggregation,
    pub tsne: TsneConfig,
    /// Put the real videos into the projection alongside the synthetic ones.
    pub tsne_include_real: bool,
    pub output_dir: PathBuf,
    pub format: OutputFormat,
}

impl RunConfig {
    pub fn new(real_manifest: impl Into<PathBuf>, synth_manifest: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            real_manifest: real_manifest.into(),
            synth_manifest: synth_manifest.into(),
            conditions: None,
            alphas: DEFAULT_ALPHAS.to_vec(),
            bins: crate::hand_geometry::DEFAULT_BINS,
            confidence_threshold: crate::data_model::DEFAULT_CONFIDENCE_THRESHOLD,
            group_average: true,
            hand_selector: HandSelector::Both,
            aggregation: LandmarkAggregation::Mean,
            tsne: TsneConfig::default(),
            tsne_include_real: true,
            output_dir: output_dir.into(),
            format: OutputFormat::Json,
        }
    }

    pub fn validate(&self) -> Result<(), ReportError> {
        if let Some(a) = self.alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(ReportError::Config(format!("alpha {a} outside [0, 1]")));
        }
        if self.bins < 2 {
            return Err(ReportError::Config(format!("bins must be at least 2, got {}", self.bins)));
        }
        if !(0.0..=1.0).contains(&self.confidence_threshold) {
            return Err(ReportError::Config(format!(
                "confidence threshold {} outside [0, 1]",
                self.confidence_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Status {
    Ok,
    Skipped { reason: String },
    Failed { error: String },
}

impl Status {
    pub fn is_failed(&self) -> bool {
        matches!(self, Status::Failed { .. })
    }

    pub fn is_ok(&self) -> bool {
        matches!(self, Status::Ok)
    }

    pub(crate) fn skipped(reason: impl Into<String>) -> Self {
        Status::Skipped { reason: reason.into() }
    }

    pub(crate) fn failed(error: impl fmt::Display) -> Self {
        Status::Failed { error: error.to_string() }
    }
}

/// A section's status and whatever data it produced. Failed sections may
/// carry partial data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Section<T> {
    #[serde(flatten)]
    pub status: Status,
    pub data: Option<T>,
}

impl<T> Section<T> {
    pub(crate) fn ok(data: T) -> Self {
        Self { status: Status::Ok, data: Some(data) }
    }

    pub(crate) fn without_data(status: Status) -> Self {
        Self { status, data: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    /// Fixed analysis choices that are not configuration flags.
    pub conventions: Vec<String>,
    pub sections: Vec<(String, Status)>,
    pub warnings: Vec<String>,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub table1: Table1,
    pub table2: Section<Vec<KinematicsRow>>,
    pub table3: Section<Vec<crate::hand_geometry::DivergencePair>>,
    pub alignment: Section<AlignmentData>,
    pub diversity: Section<DiversityData>,
    pub provenance: Provenance,
}

impl EvaluationReport {
    pub fn has_failures(&self) -> bool {
        self.provenance.sections.iter().any(|(_, s)| s.is_failed())
    }
}

pub(crate) const CONVENTIONS: [&str; 6] = [
    "fid/fvd: squared Frechet distance, covariance with N-1 denominator",
    "vas: mean synthetic frame embedding vs mean reference frame embedding; reference = reference_video_id, else the same real video, else the centroid of all real frames",
    "pas: mean over frames of frame-to-text cosine similarity",
    "clip similarity: mean vas of the condition",
    "kl: KL(real || synthetic) with 1e-10 smoothing per bin",
    "group average: synthetic frames grouped by (prompt_id, frame id suffix), video embeddings by prompt_id",
];

/// A top-level report section.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectionKind {
    Table1,
    Table2,
    Table3,
    Alignment,
    Diversity,
}

impl SectionKind {
    pub const ALL: [SectionKind; 5] =
        [SectionKind::Table1, SectionKind::Table2, SectionKind::Table3, SectionKind::Alignment, SectionKind::Diversity];

    /// Base names of the files this section writes.
    pub fn files(self) -> &'static [&'static str] {
        match self {
            SectionKind::Table1 => &["table1"],
            SectionKind::Table2 => &["table2"],
            SectionKind::Table3 => &["table3"],
            SectionKind::Alignment => &["alignment", "iso_gas"],
            SectionKind::Diversity => &["tsne_points", "ellipses", "distances"],
        }
    }
}

/// Load, compute every section and write all files into `cfg.output_dir`.
pub fn run_full_report(cfg: &RunConfig) -> Result<EvaluationReport, ReportError> {
    run_sections(cfg, &SectionKind::ALL)
}

/// Like [`run_full_report`] but computes and writes only `wanted`; the
/// other sections are marked skipped.
pub fn run_sections(cfg: &RunConfig, wanted: &[SectionKind]) -> Result<EvaluationReport, ReportError> {
    cfg.validate()?;
    let inputs = load_inputs(cfg)?;
    let mut report = evaluate_sections(&inputs, cfg, wanted);
    let names: Vec<&str> = wanted.iter().flat_map(|k| k.files().iter().copied()).collect();
    write_report_files(&mut report, &cfg.output_dir, cfg.format, Some(&names))?;
    Ok(report)
}

/// Compute every section without touching the filesystem.
pub fn evaluate(inputs: &Inputs, cfg: &RunConfig) -> EvaluationReport {
    evaluate_sections(inputs, cfg, &SectionKind::ALL)
}

pub fn evaluate_sections(inputs: &Inputs, cfg: &RunConfig, wanted: &[SectionKind]) -> EvaluationReport {
    let want = |k: SectionKind| wanted.contains(&k);
    fn not_requested<T>() -> (Section<T>, Vec<String>) {
        (Section::without_data(Status::skipped("not requested")), Vec::new())
    }
    let ((table1, table2), ((table3, alignment), diversity)) = rayon::join(
        || {
            rayon::join(
                || {
                    if want(SectionKind::Table1) {
                        table1_section(inputs, cfg)
                    } else {
                        let s = Status::skipped("not requested");
                        Table1 {
                            rows: Vec::new(),
                            hand_confidence: s.clone(),
                            fid: s.clone(),
                            fvd: s.clone(),
                            clip_similarity: s,
                        }
                    }
                },
                || if want(SectionKind::Table2) { kinematics_section(inputs, cfg) } else { not_requested() },
            )
        },
        || {
            rayon::join(
                || {
                    rayon::join(
                        || {
                            if want(SectionKind::Table3) {
                                table3_section(inputs, cfg)
                            } else {
                                not_requested().0
                            }
                        },
                        || if want(SectionKind::Alignment) { alignment_section(inputs, cfg) } else { not_requested() },
                    )
                },
                || if want(SectionKind::Diversity) { diversity_section(inputs, cfg) } else { not_requested() },
            )
        },
    );
    let mut warnings = inputs.warnings.clone();
    warnings.extend(table2.1);
    warnings.extend(alignment.1);
    warnings.extend(diversity.1);
    let (table2, alignment, diversity) = (table2.0, alignment.0, diversity.0);

    let sections = vec![
        ("table1.hand_confidence".to_string(), table1.hand_confidence.clone()),
        ("table1.fid".to_string(), table1.fid.clone()),
        ("table1.fvd".to_string(), table1.fvd.clone()),
        ("table1.clip_similarity".to_string(), table1.clip_similarity.clone()),
        ("table2".to_string(), table2.status.clone()),
        ("table3".to_string(), table3.status.clone()),
        ("alignment".to_string(), alignment.status.clone()),
        ("diversity".to_string(), diversity.status.clone()),
    ];
    EvaluationReport {
        table1,
        table2,
        table3,
        alignment,
        diversity,
        provenance: Provenance {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: cfg.clone(),
            conventions: CONVENTIONS.iter().map(|s| s.to_string()).collect(),
            sections,
            warnings,
            files: Vec::new(),
        },
    }
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io { path: path.to_path_buf(), source }
}
