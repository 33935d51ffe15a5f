//! Pose embeddings, cosine distance structure across conditions, a 2-D
//! t-SNE projection and one-sigma condition ellipses.

mod tsne;

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::data_model::{Condition, HandSelector, LandmarkTrack, LANDMARK_COUNT};
use crate::kinematics::MeanStd;

pub use tsne::{tsne_from_distances, BandwidthWarning, TsneConfig, TsneOutput};

pub const POSE_DIM: usize = LANDMARK_COUNT * 3;
const ZERO_NORM: f64 = 1e-12;
const SYMMETRY_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum DiversityError {
    #[error("`{0}`: no frames with the selected hand")]
    NoHandFrames(String),
    #[error("`{0}`: zero pose vector")]
    ZeroVector(String),
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("id `{0}` has no condition label")]
    UnlabeledId(String),
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("distance matrix invalid: {0}")]
    InvalidMatrix(String),
    #[error("perplexity {perplexity} must be below {max} for {n} points")]
    PerplexityTooHigh { perplexity: f64, max: f64, n: usize },
    #[error("invalid t-SNE setting: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoseEmbedding {
    pub video_id: String,
    pub vector: Vec<f64>,
}

/// Frame-averaged concatenation of the 21 `(x, y, z)` triples.
pub fn mean_pose_embedding(track: &LandmarkTrack, selector: HandSelector) -> Result<PoseEmbedding, DiversityError> {
    let resolved = selector.resolve(track);
    let mut sum = vec![0.0; POSE_DIM];
    let mut n = 0usize;
    for frame in &track.frames {
        for hand in selector.hands_in(frame, resolved) {
            for (k, p) in hand.points.iter().enumerate() {
                sum[3 * k] += p.x;
                sum[3 * k + 1] += p.y;
                sum[3 * k + 2] += p.z;
            }
            n += 1;
        }
    }
    if n == 0 {
        return Err(DiversityError::NoHandFrames(track.video_id.clone()));
    }
    let vector = sum.into_iter().map(|s| s / n as f64).collect();
    Ok(PoseEmbedding { video_id: track.video_id.clone(), vector })
}

/// Symmetric N×N distances with a zero diagonal, row-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceMatrix {
    ids: Vec<String>,
    values: Vec<f64>,
}

impl DistanceMatrix {
    pub fn new(ids: Vec<String>, values: Vec<f64>) -> Result<Self, DiversityError> {
        let n = ids.len();
        if values.len() != n * n {
            return Err(DiversityError::InvalidMatrix(format!("{} values for {n} ids", values.len())));
        }
        let mut seen = BTreeSet::new();
        for id in &ids {
            if !seen.insert(id) {
                return Err(DiversityError::DuplicateId(id.clone()));
            }
        }
        for i in 0..n {
            if values[i * n + i] != 0.0 {
                return Err(DiversityError::InvalidMatrix(format!("nonzero diagonal at {i}")));
            }
            for j in 0..n {
                let v = values[i * n + j];
                if !(0.0..=2.0).contains(&v) {
                    return Err(DiversityError::InvalidMatrix(format!("entry ({i}, {j}) = {v} outside [0, 2]")));
                }
                if (v - values[j * n + i]).abs() > SYMMETRY_TOL {
                    return Err(DiversityError::InvalidMatrix(format!("asymmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self { ids, values })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.len();
        &self.values[i * n..(i + 1) * n]
    }
}

/// `1 − cos(v_i, v_j)`; the upper triangle is mirrored so symmetry is exact.
pub fn cosine_distance_matrix(embeddings: &[PoseEmbedding]) -> Result<DistanceMatrix, DiversityError> {
    let n = embeddings.len();
    if n < 2 {
        return Err(DiversityError::TooFewPoints { needed: 2, got: n });
    }
    let units: Vec<Vec<f64>> = embeddings
        .iter()
        .map(|e| {
            let norm = e.vector.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm <= ZERO_NORM || !norm.is_finite() {
                return Err(DiversityError::ZeroVector(e.video_id.clone()));
            }
            Ok(e.vector.iter().map(|x| x / norm).collect())
        })
        .collect::<Result<_, _>>()?;
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i + 1..n)
                .map(|j| {
                    let cos: f64 = units[i].iter().zip(&units[j]).map(|(a, b)| a * b).sum();
                    (1.0 - cos.clamp(-1.0, 1.0)).max(0.0)
                })
                .collect()
        })
        .collect();
    let mut values = vec![0.0; n * n];
    for (i, row) in upper.iter().enumerate() {
        for (k, &d) in row.iter().enumerate() {
            let j = i + 1 + k;
            values[i * n + j] = d;
            values[j * n + i] = d;
        }
    }
    DistanceMatrix::new(embeddings.iter().map(|e| e.video_id.clone()).collect(), values)
}

/// Distance statistics between (or, when `a == b`, within) two conditions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairStats {
    pub a: Condition,
    pub b: Condition,
    pub mean: f64,
    pub std: f64,
    pub pairs: usize,
}

/// One entry per unordered condition pair with `a <= b`. Intra entries of
/// single-member conditions are omitted.
pub fn inter_intra_stats(
    m: &DistanceMatrix,
    labels: &BTreeMap<String, Condition>,
) -> Result<Vec<PairStats>, DiversityError> {
    let lab: Vec<Condition> = m
        .ids()
        .iter()
        .map(|id| labels.get(id).copied().ok_or_else(|| DiversityError::UnlabeledId(id.clone())))
        .collect::<Result<_, _>>()?;
    let mut buckets: BTreeMap<(Condition, Condition), Vec<f64>> = BTreeMap::new();
    for i in 0..m.len() {
        for j in i + 1..m.len() {
            let key = if lab[i] <= lab[j] { (lab[i], lab[j]) } else { (lab[j], lab[i]) };
            buckets.entry(key).or_default().push(m.get(i, j));
        }
    }
    Ok(buckets
        .into_iter()
        .filter_map(|((a, b), d)| {
            let s = MeanStd::of(&d)?;
            Some(PairStats { a, b, mean: s.mean, std: s.std, pairs: s.count })
        })
        .collect())
}

/// One-sigma ellipse of a condition's projected points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EllipseSummary {
    pub condition: Condition,
    pub center: [f64; 2],
    pub cov2d: [[f64; 2]; 2],
    pub major: f64,
    pub minor: f64,
    /// Major-axis orientation in `(-π/2, π/2]`.
    pub angle_rad: f64,
}

pub fn condition_ellipse(condition: Condition, points: &[[f64; 2]]) -> Result<EllipseSummary, DiversityError> {
    let n = points.len();
    if n < 3 {
        return Err(DiversityError::TooFewPoints { needed: 3, got: n });
    }
    let cx = points.iter().map(|p| p[0]).sum::<f64>() / n as f64;
    let cy = points.iter().map(|p| p[1]).sum::<f64>() / n as f64;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in points {
        let (dx, dy) = (p[0] - cx, p[1] - cy);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let d = (n - 1) as f64;
    let (a, b, c) = (sxx / d, sxy / d, syy / d);
    let mid = 0.5 * (a + c);
    let rad = (0.25 * (a - c).powi(2) + b * b).sqrt();
    let angle = if b == 0.0 && a >= c {
        0.0
    } else {
        let t = 0.5 * (2.0 * b).atan2(a - c);
        if t <= -std::f64::consts::FRAC_PI_2 { t + std::f64::consts::PI } else { t }
    };
    Ok(EllipseSummary {
        condition,
        center: [cx, cy],
        cov2d: [[a, b], [b, c]],
        major: (mid + rad).max(0.0).sqrt(),
        minor: (mid - rad).max(0.0).sqrt(),
        angle_rad: angle,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::test_support::track;
    use crate::data_model::{FrameRecord, LandmarkPoint};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pose(id: &str, v: Vec<f64>) -> PoseEmbedding {
        PoseEmbedding { video_id: id.into(), vector: v }
    }

    fn axis(id: &str, k: usize, scale: f64) -> PoseEmbedding {
        let mut v = vec![0.0; POSE_DIM];
        v[k] = scale;
        pose(id, v)
    }

    fn scale_points(f: &mut FrameRecord, s: f64) {
        for p in f.hands[0].points.iter_mut() {
            *p = LandmarkPoint::new(p.x * s, p.y * s, p.z * s);
        }
    }

    #[test]
    fn single_frame_embedding_is_that_frame() {
        let t = track("v", &[0.9]);
        let e = mean_pose_embedding(&t, HandSelector::MostConfident).unwrap();
        assert_eq!(e.vector.len(), 63);
        let p = t.frames[0].hands[0].points[5];
        assert_eq!(&e.vector[15..18], &[p.x, p.y, p.z]);
    }

    #[test]
    fn opposite_frames_average_to_zero() {
        let mut t = track("v", &[0.9, 0.9]);
        let neg = t.frames[0].clone();
        t.frames[1].hands = neg.hands;
        scale_points(&mut t.frames[1], -1.0);
        let e = mean_pose_embedding(&t, HandSelector::MostConfident).unwrap();
        assert!(e.vector.iter().all(|&x| x.abs() < 1e-15));
    }

    #[test]
    fn constant_hand_gives_constant_vector() {
        let mut t = track("v", &vec![0.9; 100]);
        let first = t.frames[0].hands.clone();
        for f in &mut t.frames {
            f.hands = first.clone();
        }
        let e = mean_pose_embedding(&t, HandSelector::MostConfident).unwrap();
        for (k, p) in first[0].points.iter().enumerate() {
            assert!((e.vector[3 * k] - p.x).abs() < 1e-14);
        }
    }

    #[test]
    fn no_hand_frames() {
        let mut t = track("v", &[0.9]);
        t.frames[0].hands.clear();
        assert_eq!(
            mean_pose_embedding(&t, HandSelector::MostConfident),
            Err(DiversityError::NoHandFrames("v".into()))
        );
    }

    #[test]
    fn distance_examples() {
        let m = cosine_distance_matrix(&[axis("a", 0, 1.0), axis("b", 1, 2.0), axis("c", 0, -3.0), axis("d", 0, 5.0)])
            .unwrap();
        assert_eq!(m.get(0, 1), 1.0);
        assert_eq!(m.get(0, 2), 2.0);
        assert_eq!(m.get(0, 3), 0.0);
        for i in 0..4 {
            assert_eq!(m.get(i, i), 0.0);
            for j in 0..4 {
                assert_eq!(m.get(i, j), m.get(j, i));
            }
        }
    }

    #[test]
    fn zero_vector_named() {
        let r = cosine_distance_matrix(&[axis("a", 0, 1.0), pose("z", vec![0.0; POSE_DIM])]);
        assert_eq!(r, Err(DiversityError::ZeroVector("z".into())));
    }

    #[test]
    fn orthogonal_clusters() {
        let es = [axis("a1", 0, 1.0), axis("a2", 0, 2.0), axis("b1", 1, 1.0), axis("b2", 1, 3.0)];
        let m = cosine_distance_matrix(&es).unwrap();
        let labels: BTreeMap<_, _> = [
            ("a1", Condition::StaticScene),
            ("a2", Condition::StaticScene),
            ("b1", Condition::ColorShift),
            ("b2", Condition::ColorShift),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        let s = inter_intra_stats(&m, &labels).unwrap();
        assert_eq!(s.len(), 3);
        for p in &s {
            let expect = if p.a == p.b { 0.0 } else { 1.0 };
            assert_eq!(p.mean, expect);
        }
    }

    #[test]
    fn singleton_intra_is_absent_and_unlabeled_errors() {
        let m = cosine_distance_matrix(&[axis("a", 0, 1.0), axis("b", 1, 1.0)]).unwrap();
        let mut labels = BTreeMap::from([("a".to_string(), Condition::Reference)]);
        assert_eq!(inter_intra_stats(&m, &labels), Err(DiversityError::UnlabeledId("b".into())));
        labels.insert("b".into(), Condition::FastMotion);
        let s = inter_intra_stats(&m, &labels).unwrap();
        assert_eq!(s.len(), 1);
        assert_ne!(s[0].a, s[0].b);
    }

    #[test]
    fn stats_match_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let conds = [Condition::Reference, Condition::NoisyScene, Condition::SlowMotion];
        let es: Vec<_> =
            (0..10).map(|i| pose(&format!("p{i}"), (0..POSE_DIM).map(|_| rng.random_range(-1.0..1.0)).collect())).collect();
        let labels: BTreeMap<String, Condition> = (0..10).map(|i| (format!("p{i}"), conds[i % 3])).collect();
        let m = cosine_distance_matrix(&es).unwrap();
        let stats = inter_intra_stats(&m, &labels).unwrap();
        for s in &stats {
            let mut d = Vec::new();
            for i in 0..10 {
                for j in 0..10 {
                    if i != j && conds[i % 3] == s.a && conds[j % 3] == s.b {
                        let (u, v) = (&es[i].vector, &es[j].vector);
                        let dot: f64 = u.iter().zip(v).map(|(x, y)| x * y).sum();
                        let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
                        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                        d.push(1.0 - dot / (nu * nv));
                    }
                }
            }
            let mean = d.iter().sum::<f64>() / d.len() as f64;
            let std = (d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / d.len() as f64).sqrt();
            assert!((s.mean - mean).abs() < 1e-12 && (s.std - std).abs() < 1e-12, "{s:?}");
        }
        assert_eq!(stats.len(), 6);
    }

    #[test]
    fn matrix_validation() {
        let ids = vec!["a".to_string(), "b".to_string()];
        assert!(DistanceMatrix::new(ids.clone(), vec![0.0, 0.5, 0.5, 0.0]).is_ok());
        assert!(DistanceMatrix::new(ids.clone(), vec![0.1, 0.5, 0.5, 0.0]).is_err());
        assert!(DistanceMatrix::new(ids.clone(), vec![0.0, 0.5, 0.6, 0.0]).is_err());
        assert!(DistanceMatrix::new(ids.clone(), vec![0.0, 2.5, 2.5, 0.0]).is_err());
        assert_eq!(
            DistanceMatrix::new(vec!["a".into(), "a".into()], vec![0.0; 4]),
            Err(DiversityError::DuplicateId("a".into()))
        );
    }

    #[test]
    fn ellipse_of_cross() {
        let e = condition_ellipse(Condition::Reference, &[[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]).unwrap();
        assert_eq!(e.center, [0.0, 0.0]);
        let r = (2.0f64 / 3.0).sqrt();
        assert!((e.major - r).abs() < 1e-15 && (e.minor - r).abs() < 1e-15);
        assert_eq!(e.cov2d[0][1], 0.0);
    }

    #[test]
    fn collinear_ellipse() {
        let e = condition_ellipse(Condition::Reference, &[[0.0, 2.0], [1.0, 2.0], [3.0, 2.0]]).unwrap();
        assert_eq!(e.minor, 0.0);
        assert_eq!(e.angle_rad, 0.0);
        assert!(e.major > 0.0);
        let v = condition_ellipse(Condition::Reference, &[[1.0, 0.0], [1.0, 1.0], [1.0, 3.0]]).unwrap();
        assert!((v.angle_rad - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert!(condition_ellipse(Condition::Reference, &[[0.0, 0.0], [1.0, 1.0]]).is_err());
    }

    proptest! {
        #[test]
        fn scaling_vectors_leaves_distances(
            raw in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, POSE_DIM), 3..6),
            scales in prop::collection::vec(0.01f64..100.0, 6),
        ) {
            let es: Vec<_> = raw.iter().enumerate().map(|(i, v)| pose(&format!("p{i}"), v.clone())).collect();
            let scaled: Vec<_> = es.iter().zip(&scales)
                .map(|(e, s)| pose(&e.video_id, e.vector.iter().map(|x| x * s).collect()))
                .collect();
            let a = cosine_distance_matrix(&es).unwrap();
            let b = cosine_distance_matrix(&scaled).unwrap();
            for i in 0..es.len() {
                for j in 0..es.len() {
                    prop_assert!((a.get(i, j) - b.get(i, j)).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn ellipse_translation_and_rotation(
            pts in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 3..30),
            tx in -10.0f64..10.0, ty in -10.0f64..10.0, theta in -3.0f64..3.0,
        ) {
            let p: Vec<[f64; 2]> = pts.iter().map(|&(x, y)| [x, y]).collect();
            let e = condition_ellipse(Condition::Reference, &p).unwrap();
            prop_assert!(e.major >= e.minor && e.minor >= 0.0);
            let shifted: Vec<_> = p.iter().map(|q| [q[0] + tx, q[1] + ty]).collect();
            let s = condition_ellipse(Condition::Reference, &shifted).unwrap();
            let tol = 1e-9 * (1.0 + e.major);
            prop_assert!((s.major - e.major).abs() < tol && (s.minor - e.minor).abs() < tol);
            prop_assert!((s.center[0] - e.center[0] - tx).abs() < 1e-9);
            let (c, sn) = (theta.cos(), theta.sin());
            let rotated: Vec<_> = p.iter().map(|q| [c * q[0] - sn * q[1], sn * q[0] + c * q[1]]).collect();
            let r = condition_ellipse(Condition::Reference, &rotated).unwrap();
            prop_assert!((r.major - e.major).abs() < tol && (r.minor - e.minor).abs() < tol);
        }
    }
}
