//! Finger joint angles and real-vs-synthetic angle distribution divergences.

use std::fmt;

use rayon::prelude::*;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::data_model::{HandSelector, LandmarkPoint, LandmarkTrack};

/// Minimum segment length for a well-defined angle.
pub const DEFAULT_SEGMENT_EPS: f64 = 1e-9;
/// Mass added to every bin before normalizing, for KL.
pub const KL_SMOOTHING: f64 = 1e-10;
pub const DEFAULT_BINS: usize = 36;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("segment shorter than {eps}")]
    DegenerateSegment { eps: f64 },
    #[error("no angles to work with")]
    EmptyInput,
    #[error("histogram needs at least 2 bins, got {0}")]
    TooFewBins(usize),
    #[error("angle {0} outside [0, 180]")]
    AngleOutOfRange(f64),
    #[error("histograms have different bin edges")]
    BinMismatch,
    #[error("{joint}: {source}")]
    Joint {
        joint: String,
        #[source]
        source: Box<GeometryError>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Finger {
    Thumb,
    Index,
    Middle,
    Ring,
    Pinky,
}

impl Finger {
    pub fn label(self) -> &'static str {
        match self {
            Finger::Thumb => "Thumb",
            Finger::Index => "Index",
            Finger::Middle => "Middle",
            Finger::Ring => "Ring",
            Finger::Pinky => "Pinky",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum JointName {
    #[serde(rename = "CMC")]
    Cmc,
    #[serde(rename = "MCP")]
    Mcp,
    #[serde(rename = "PIP")]
    Pip,
    #[serde(rename = "DIP")]
    Dip,
    #[serde(rename = "IP")]
    Ip,
}

impl JointName {
    pub fn label(self) -> &'static str {
        match self {
            JointName::Cmc => "CMC",
            JointName::Mcp => "MCP",
            JointName::Pip => "PIP",
            JointName::Dip => "DIP",
            JointName::Ip => "IP",
        }
    }
}

/// A joint angle: the angle at landmark `triple.1` between the segments to
/// `triple.0` and `triple.2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct JointSpec {
    pub finger: Finger,
    pub joint_name: JointName,
    pub triple: (usize, usize, usize),
}

impl JointSpec {
    const fn new(finger: Finger, joint_name: JointName, triple: (usize, usize, usize)) -> Self {
        Self { finger, joint_name, triple }
    }

    pub fn joint_landmark(&self) -> usize {
        self.triple.1
    }
}

impl fmt::Display for JointSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} ({})", self.finger.label(), self.joint_name.label(), self.triple.1)
    }
}

use Finger::*;
use JointName::*;

/// The 15 joints, thumb to pinky, proximal to distal.
pub const CANONICAL_JOINTS: [JointSpec; 15] = [
    JointSpec::new(Thumb, Cmc, (0, 1, 2)),
    JointSpec::new(Thumb, Mcp, (1, 2, 3)),
    JointSpec::new(Thumb, Ip, (2, 3, 4)),
    JointSpec::new(Index, Mcp, (0, 5, 6)),
    JointSpec::new(Index, Pip, (5, 6, 7)),
    JointSpec::new(Index, Dip, (6, 7, 8)),
    JointSpec::new(Middle, Mcp, (0, 9, 10)),
    JointSpec::new(Middle, Pip, (9, 10, 11)),
    JointSpec::new(Middle, Dip, (10, 11, 12)),
    JointSpec::new(Ring, Mcp, (0, 13, 14)),
    JointSpec::new(Ring, Pip, (13, 14, 15)),
    JointSpec::new(Ring, Dip, (14, 15, 16)),
    JointSpec::new(Pinky, Mcp, (0, 17, 18)),
    JointSpec::new(Pinky, Pip, (17, 18, 19)),
    JointSpec::new(Pinky, Dip, (18, 19, 20)),
];

/// Angle at `joint`, in degrees within `[0, 180]`.
pub fn joint_angle(
    prev: &LandmarkPoint,
    joint: &LandmarkPoint,
    next: &LandmarkPoint,
    eps: f64,
) -> Result<f64, GeometryError> {
    let a = prev.sub(joint);
    let b = next.sub(joint);
    let na = norm(&a);
    let nb = norm(&b);
    if na <= eps || nb <= eps {
        return Err(GeometryError::DegenerateSegment { eps });
    }
    let cos = (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]) / (na * nb);
    Ok(cos.clamp(-1.0, 1.0).acos().to_degrees())
}

fn norm(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointAngles {
    pub angles: Vec<f64>,
    /// Frames skipped because a segment was degenerate.
    pub degenerate: usize,
}

/// One angle per (frame, admitted hand), in track order.
pub fn extract_joint_angles(
    tracks: &[LandmarkTrack],
    joint: &JointSpec,
    selector: HandSelector,
) -> Result<JointAngles, GeometryError> {
    let (p, j, n) = joint.triple;
    let mut out = JointAngles { angles: Vec::new(), degenerate: 0 };
    for track in tracks {
        let resolved = selector.resolve(track);
        for frame in &track.frames {
            for hand in selector.hands_in(frame, resolved) {
                match joint_angle(&hand.points[p], &hand.points[j], &hand.points[n], DEFAULT_SEGMENT_EPS) {
                    Ok(a) => out.angles.push(a),
                    Err(_) => out.degenerate += 1,
                }
            }
        }
    }
    if out.angles.is_empty() {
        return Err(GeometryError::EmptyInput);
    }
    Ok(out)
}

/// Uniform histogram over `[0°, 180°]`. Bins are right-open except the last,
/// which includes 180°.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AngleHistogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl AngleHistogram {
    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_width(&self) -> f64 {
        180.0 / self.bins() as f64
    }

    pub fn probabilities(&self) -> Vec<f64> {
        let t = self.total as f64;
        self.counts.iter().map(|&c| c as f64 / t).collect()
    }

    /// Histogram directly from counts, for callers that already binned.
    pub fn from_counts(counts: Vec<u64>) -> Result<Self, GeometryError> {
        if counts.len() < 2 {
            return Err(GeometryError::TooFewBins(counts.len()));
        }
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(GeometryError::EmptyInput);
        }
        Ok(Self { bin_edges: uniform_edges(counts.len()), counts, total })
    }
}

fn uniform_edges(bins: usize) -> Vec<f64> {
    (0..=bins).map(|i| 180.0 * i as f64 / bins as f64).collect()
}

pub fn histogram(angles: &[f64], bins: usize) -> Result<AngleHistogram, GeometryError> {
    if bins < 2 {
        return Err(GeometryError::TooFewBins(bins));
    }
    if angles.is_empty() {
        return Err(GeometryError::EmptyInput);
    }
    let width = 180.0 / bins as f64;
    let mut counts = vec![0u64; bins];
    for &a in angles {
        if !(0.0..=180.0).contains(&a) {
            return Err(GeometryError::AngleOutOfRange(a));
        }
        let idx = ((a / width).floor() as usize).min(bins - 1);
        counts[idx] += 1;
    }
    Ok(AngleHistogram { bin_edges: uniform_edges(bins), counts, total: angles.len() as u64 })
}

fn check_bins(p: &AngleHistogram, q: &AngleHistogram) -> Result<(), GeometryError> {
    if p.bin_edges != q.bin_edges || p.total == 0 || q.total == 0 {
        return Err(GeometryError::BinMismatch);
    }
    Ok(())
}

/// `KL(P || Q)` in nats over ε-smoothed, renormalized bin probabilities.
pub fn kl_divergence(p: &AngleHistogram, q: &AngleHistogram) -> Result<f64, GeometryError> {
    check_bins(p, q)?;
    let smooth = |h: &AngleHistogram| {
        let raw: Vec<f64> = h.probabilities().into_iter().map(|v| v + KL_SMOOTHING).collect();
        let z: f64 = raw.iter().sum();
        raw.into_iter().map(move |v| v / z)
    };
    let kl: f64 = smooth(p).zip(smooth(q)).map(|(pi, qi)| pi * (pi / qi).ln()).sum();
    // rounding can dip a hair below zero for identical inputs
    Ok(kl.max(0.0))
}

/// Wasserstein-1 between normalized histograms in bin units:
/// `sum_i |CDF_P(i) - CDF_Q(i)|`.
pub fn emd_1d_bins(p: &AngleHistogram, q: &AngleHistogram) -> Result<f64, GeometryError> {
    check_bins(p, q)?;
    let (pp, qq) = (p.probabilities(), q.probabilities());
    let mut cdf_diff = 0.0;
    let mut total = 0.0;
    // the last CDF difference is always 0
    for i in 0..pp.len() - 1 {
        cdf_diff += pp[i] - qq[i];
        total += cdf_diff.abs();
    }
    Ok(total)
}

/// [`emd_1d_bins`] scaled by the bin width, in degrees.
pub fn emd_1d(p: &AngleHistogram, q: &AngleHistogram) -> Result<f64, GeometryError> {
    Ok(emd_1d_bins(p, q)? * p.bin_width())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergencePair {
    #[serde(serialize_with = "joint_fields")]
    pub joint: JointSpec,
    pub kl: f64,
    pub emd_deg: f64,
    pub emd_bins: f64,
    pub real_angles: usize,
    pub synth_angles: usize,
}

fn joint_fields<S: Serializer>(j: &JointSpec, s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeStruct;
    let mut st = s.serialize_struct("JointSpec", 3)?;
    st.serialize_field("finger", &j.finger)?;
    st.serialize_field("mp_joint", &j.joint_landmark())?;
    st.serialize_field("type", &j.joint_name)?;
    st.end()
}

/// `KL(real || synth)` and EMD between angle distributions for each of the
/// 15 canonical joints, in canonical order.
pub fn compare_angle_distributions(
    real: &[LandmarkTrack],
    synth: &[LandmarkTrack],
    bins: usize,
    selector: HandSelector,
) -> Result<Vec<DivergencePair>, GeometryError> {
    compare_angle_distributions_with((real, selector), (synth, selector), bins)
}

/// As [`compare_angle_distributions`], with a hand selector per dataset.
pub fn compare_angle_distributions_with(
    (real, real_selector): (&[LandmarkTrack], HandSelector),
    (synth, synth_selector): (&[LandmarkTrack], HandSelector),
    bins: usize,
) -> Result<Vec<DivergencePair>, GeometryError> {
    CANONICAL_JOINTS
        .par_iter()
        .map(|joint| {
            let annotate = |e: GeometryError| GeometryError::Joint { joint: joint.to_string(), source: Box::new(e) };
            let r = extract_joint_angles(real, joint, real_selector).map_err(annotate)?;
            let s = extract_joint_angles(synth, joint, synth_selector).map_err(annotate)?;
            let hr = histogram(&r.angles, bins).map_err(annotate)?;
            let hs = histogram(&s.angles, bins).map_err(annotate)?;
            Ok(DivergencePair {
                joint: *joint,
                kl: kl_divergence(&hr, &hs).map_err(annotate)?,
                emd_deg: emd_1d(&hr, &hs).map_err(annotate)?,
                emd_bins: emd_1d_bins(&hr, &hs).map_err(annotate)?,
                real_angles: r.angles.len(),
                synth_angles: s.angles.len(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(x: f64, y: f64, z: f64) -> LandmarkPoint {
        LandmarkPoint::new(x, y, z)
    }

    #[test]
    fn collinear_and_perpendicular() {
        let a = joint_angle(&pt(0., 0., 0.), &pt(1., 0., 0.), &pt(2., 0., 0.), 1e-9).unwrap();
        assert!((a - 180.0).abs() < 1e-9);
        let a = joint_angle(&pt(0., 0., 0.), &pt(1., 0., 0.), &pt(1., 1., 0.), 1e-9).unwrap();
        assert!((a - 90.0).abs() < 1e-9);
        assert!(matches!(
            joint_angle(&pt(1., 0., 0.), &pt(1., 0., 0.), &pt(2., 0., 0.), 1e-9),
            Err(GeometryError::DegenerateSegment { .. })
        ));
    }

    #[test]
    fn canonical_table_is_complete() {
        assert_eq!(CANONICAL_JOINTS.len(), 15);
        assert_eq!(CANONICAL_JOINTS[0].triple, (0, 1, 2));
        assert_eq!(CANONICAL_JOINTS[4].triple, (5, 6, 7));
        assert_eq!(CANONICAL_JOINTS[14].triple, (18, 19, 20));
        // each finger has three joints in proximal-to-distal order
        for chunk in CANONICAL_JOINTS.chunks(3) {
            assert!(chunk.iter().all(|j| j.finger == chunk[0].finger));
            assert!(chunk[0].triple.1 < chunk[1].triple.1 && chunk[1].triple.1 < chunk[2].triple.1);
        }
    }

    #[test]
    fn histogram_edges_and_closure() {
        let h = histogram(&[0.0], 36).unwrap();
        assert_eq!(h.counts[0], 1);
        let h = histogram(&[180.0], 36).unwrap();
        assert_eq!(h.counts[35], 1);
        assert_eq!(h.bin_edges.len(), 37);
        assert!(matches!(histogram(&[], 36), Err(GeometryError::EmptyInput)));
        assert!(matches!(histogram(&[1.0], 1), Err(GeometryError::TooFewBins(1))));
        assert!(matches!(histogram(&[181.0], 4), Err(GeometryError::AngleOutOfRange(_))));
    }

    #[test]
    fn uniform_grid_fills_bins_evenly() {
        // 360 angles at 0.5° spacing starting at 0.25° (never on an edge)
        let angles: Vec<f64> = (0..360).map(|i| 0.25 + 0.5 * i as f64).collect();
        // independent count: bin k holds angles in [5k, 5k+5)
        for k in 0..36 {
            let expect = angles.iter().filter(|&&a| a >= 5.0 * k as f64 && a < 5.0 * (k + 1) as f64).count();
            assert_eq!(expect, 10);
        }
        let h = histogram(&angles, 36).unwrap();
        assert!(h.counts.iter().all(|&c| c == 10));
    }

    #[test]
    fn kl_two_bin_example_and_asymmetry() {
        let p = AngleHistogram::from_counts(vec![2, 2]).unwrap();
        let q = AngleHistogram::from_counts(vec![3, 1]).unwrap();
        // oracle: 0.5 ln(0.5/0.75) + 0.5 ln(0.5/0.25)
        let oracle = 0.5 * (0.5f64 / 0.75).ln() + 0.5 * (0.5f64 / 0.25).ln();
        assert!((oracle - 0.1438).abs() < 1e-4);
        let kl = kl_divergence(&p, &q).unwrap();
        assert!((kl - oracle).abs() < 1e-9);
        assert!((kl_divergence(&q, &p).unwrap() - kl).abs() > 1e-3);
        assert!(kl_divergence(&p, &p).unwrap() <= 1e-9);
    }

    #[test]
    fn emd_point_masses() {
        let mut a = vec![0u64; 36];
        let mut b = vec![0u64; 36];
        a[0] = 7;
        b[3] = 2;
        let (p, q) = (AngleHistogram::from_counts(a).unwrap(), AngleHistogram::from_counts(b).unwrap());
        assert!((emd_1d(&p, &q).unwrap() - 15.0).abs() < 1e-12);
        assert!((emd_1d_bins(&p, &q).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(emd_1d(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn bin_mismatch() {
        let p = AngleHistogram::from_counts(vec![1, 1]).unwrap();
        let q = AngleHistogram::from_counts(vec![1, 1, 1]).unwrap();
        assert_eq!(kl_divergence(&p, &q), Err(GeometryError::BinMismatch));
        assert_eq!(emd_1d(&p, &q), Err(GeometryError::BinMismatch));
    }

    fn hist_strategy(bins: usize) -> impl Strategy<Value = AngleHistogram> {
        prop::collection::vec(0u64..20, bins)
            .prop_filter("non-empty", |c| c.iter().sum::<u64>() > 0)
            .prop_map(|c| AngleHistogram::from_counts(c).unwrap())
    }

    proptest! {
        #[test]
        fn angle_invariant_under_similarity_transforms(
            p in prop::array::uniform9(-1.0f64..1.0),
            shift in prop::array::uniform3(-5.0f64..5.0),
            scale in 0.1f64..10.0,
            (ra, rb) in (0.0f64..6.3, 0.0f64..6.3),
        ) {
            let pts = [pt(p[0], p[1], p[2]), pt(p[3], p[4], p[5]), pt(p[6], p[7], p[8])];
            prop_assume!(norm(&pts[0].sub(&pts[1])) > 1e-3 && norm(&pts[2].sub(&pts[1])) > 1e-3);
            let (sa, ca) = ra.sin_cos();
            let (sb, cb) = rb.sin_cos();
            let tf = |q: &LandmarkPoint| {
                let r = [ca * q.x - sa * q.y, sa * q.x + ca * q.y, q.z];
                let r = [r[0], cb * r[1] - sb * r[2], sb * r[1] + cb * r[2]];
                pt(scale * r[0] + shift[0], scale * r[1] + shift[1], scale * r[2] + shift[2])
            };
            let a = joint_angle(&pts[0], &pts[1], &pts[2], 1e-9).unwrap();
            let b = joint_angle(&tf(&pts[0]), &tf(&pts[1]), &tf(&pts[2]), 1e-9).unwrap();
            prop_assert!((a - b).abs() < 1e-6);
        }

        #[test]
        fn kl_is_non_negative(p in hist_strategy(8), q in hist_strategy(8)) {
            let kl = kl_divergence(&p, &q).unwrap();
            prop_assert!(kl >= 0.0);
            if p.probabilities() != q.probabilities() {
                prop_assert!(kl > 1e-9);
            }
        }

        #[test]
        fn emd_is_a_metric(p in hist_strategy(6), q in hist_strategy(6), r in hist_strategy(6)) {
            let d = |a: &AngleHistogram, b: &AngleHistogram| emd_1d(a, b).unwrap();
            prop_assert!((d(&p, &q) - d(&q, &p)).abs() < 1e-12);
            prop_assert!(d(&p, &p) == 0.0);
            prop_assert!(d(&p, &r) <= d(&p, &q) + d(&q, &r) + 1e-9);
        }
    }
}
