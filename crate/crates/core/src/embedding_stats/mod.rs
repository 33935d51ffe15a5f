//! Fréchet distances over embedding populations (FID when fed image
//! features, FVD when fed video features) and CLIP-style alignment scores.

mod alignment;
mod gaussian;

use thiserror::Error;

pub use alignment::{
    cosine_similarity, gas, iso_gas_lines, video_alignment, AlignmentRecord, GasConfig, IsoGasLine,
};
pub use gaussian::{
    frechet_distance, gaussian_summary, group_average, matrix_sqrt_psd, GaussianSummary, SummaryStats,
    PSD_TOL, SYMMETRY_TOL,
};

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("need at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("matrix not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("matrix too indefinite (eigenvalue {0:e})")]
    TooIndefinite(f64),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("id `{0}` has no group")]
    UnmappedId(String),
    #[error("zero-length vector")]
    ZeroVector,
    #[error("`{0}`: no frames")]
    EmptyFrames(String),
    #[error("alpha {0} outside [0, 1]")]
    InvalidAlpha(f64),
    #[error("no records")]
    EmptyInput,
}
