use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use super::StatsError;
use crate::data_model::EmbeddingMatrix;

/// Symmetry tolerance for matrices entering [`matrix_sqrt_psd`], relative to
/// `1 + max |m_ij|`.
pub const SYMMETRY_TOL: f64 = 1e-8;
/// Most negative eigenvalue accepted as round-off, relative to `max(1, λ_max)`.
pub const PSD_TOL: f64 = 1e-6;

/// Mean and covariance (N−1 denominator) of an embedding population.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSummary {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub count: usize,
}

impl GaussianSummary {
    /// Build from explicit moments; the covariance is validated and symmetrized.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>, count: usize) -> Result<Self, StatsError> {
        if count < 2 {
            return Err(StatsError::TooFewRows(count));
        }
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(StatsError::DimensionMismatch(mean.len(), cov.nrows()));
        }
        check_symmetric(&cov)?;
        let cov = symmetrize(&cov);
        let eig = SymmetricEigen::new(cov.clone());
        check_psd(&eig.eigenvalues)?;
        Ok(Self { mean, cov, count })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryStats {
    pub count: usize,
    pub dim: usize,
    pub trace: f64,
}

impl From<&GaussianSummary> for SummaryStats {
    fn from(g: &GaussianSummary) -> Self {
        Self { count: g.count, dim: g.dim(), trace: g.cov.trace() }
    }
}

/// Sample mean and covariance of the rows of `e`, reduced in sorted id order.
pub fn gaussian_summary(e: &EmbeddingMatrix) -> Result<GaussianSummary, StatsError> {
    let n = e.len();
    if n < 2 {
        return Err(StatsError::TooFewRows(n));
    }
    let d = e.dim;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| e.ids[a].cmp(&e.ids[b]));

    let mut mean = DVector::<f64>::zeros(d);
    for &i in &order {
        for (m, &v) in mean.iter_mut().zip(e.row(i)) {
            *m += v as f64;
        }
    }
    mean /= n as f64;

    let mut cov = DMatrix::<f64>::zeros(d, d);
    let mut centered = vec![0.0f64; d];
    for &i in &order {
        for (c, (&v, m)) in centered.iter_mut().zip(e.row(i).iter().zip(mean.iter())) {
            *c = v as f64 - m;
        }
        for a in 0..d {
            let ca = centered[a];
            for b in a..d {
                cov[(a, b)] += ca * centered[b];
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            let v = cov[(a, b)] / (n - 1) as f64;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    Ok(GaussianSummary { mean, cov, count: n })
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<(), StatsError> {
    if m.nrows() != m.ncols() {
        return Err(StatsError::NotSymmetric(f64::INFINITY));
    }
    let scale = 1.0 + m.amax();
    let asym = (m - m.transpose()).amax();
    if asym > SYMMETRY_TOL * scale {
        return Err(StatsError::NotSymmetric(asym));
    }
    Ok(())
}

fn check_psd(eigenvalues: &DVector<f64>) -> Result<(), StatsError> {
    let max = eigenvalues.max().max(1.0);
    let min = eigenvalues.min();
    if min < -PSD_TOL * max {
        return Err(StatsError::TooIndefinite(min));
    }
    Ok(())
}

/// Principal square root of a symmetric PSD matrix via eigendecomposition;
/// small negative eigenvalues are clamped to zero before rooting.
pub fn matrix_sqrt_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>, StatsError> {
    check_symmetric(m)?;
    let eig = SymmetricEigen::new(symmetrize(m));
    check_psd(&eig.eigenvalues)?;
    Ok(sqrt_from_eigen(eig))
}

fn sqrt_from_eigen(eig: SymmetricEigen<f64, nalgebra::Dyn>) -> DMatrix<f64> {
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let v = &eig.eigenvectors;
    let s = v * DMatrix::from_diagonal(&roots) * v.transpose();
    symmetrize(&s)
}

/// Squared Fréchet distance between two Gaussians:
/// `|μa − μb|² + tr(Σa + Σb − 2 (Σa^½ Σb Σa^½)^½)`, clamped at zero.
pub fn frechet_distance(a: &GaussianSummary, b: &GaussianSummary) -> Result<f64, StatsError> {
    if a.dim() != b.dim() {
        return Err(StatsError::DimensionMismatch(a.dim(), b.dim()));
    }
    let diff = &a.mean - &b.mean;
    let sqrt_a = sqrt_from_eigen(SymmetricEigen::new(a.cov.clone()));
    let cross = symmetrize(&(&sqrt_a * &b.cov * &sqrt_a));
    let cross_trace: f64 = SymmetricEigen::new(cross)
        .eigenvalues
        .iter()
        .map(|l| l.max(0.0).sqrt())
        .sum();
    let d2 = diff.norm_squared() + a.cov.trace() + b.cov.trace() - 2.0 * cross_trace;
    Ok(d2.max(0.0))
}

/// Average rows sharing a group. Output ids are the sorted group ids; each row
/// is the arithmetic mean of its members (accumulated in f64).
pub fn group_average(
    e: &EmbeddingMatrix,
    groups: &BTreeMap<String, String>,
) -> Result<EmbeddingMatrix, StatsError> {
    let mut acc: BTreeMap<&str, (Vec<f64>, usize)> = BTreeMap::new();
    for i in 0..e.len() {
        let g = groups.get(&e.ids[i]).ok_or_else(|| StatsError::UnmappedId(e.ids[i].clone()))?;
        let slot = acc.entry(g.as_str()).or_insert_with(|| (vec![0.0; e.dim], 0));
        for (s, &v) in slot.0.iter_mut().zip(e.row(i)) {
            *s += v as f64;
        }
        slot.1 += 1;
    }
    let mut ids = Vec::with_capacity(acc.len());
    let mut rows = Vec::with_capacity(acc.len() * e.dim);
    for (g, (sum, n)) in acc {
        ids.push(g.to_string());
        rows.extend(sum.iter().map(|s| (s / n as f64) as f32));
    }
    Ok(EmbeddingMatrix { ids, dim: e.dim, rows, kind: e.kind })
}
