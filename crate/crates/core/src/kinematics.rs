//! Velocity, acceleration and jerk magnitudes of hand landmark trajectories.
//!
//! Derivatives are iterated forward differences with respect to the frame
//! timestamps. Frames where the selected hand is missing split a track into
//! independent runs; nothing is interpolated across gaps. Magnitudes are in
//! normalized image coordinates per second^order.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data_model::{HandSelector, LandmarkTrack, LANDMARK_COUNT};

#[derive(Debug, Error, PartialEq)]
pub enum KinematicsError {
    #[error("`{video_id}`: no run of {needed} consecutive frames with the selected hand")]
    TooShort { video_id: String, needed: usize },
    #[error("`{video_id}`: duplicate timestamp at frame {frame_index}")]
    ZeroTimeStep { video_id: String, frame_index: u64 },
    #[error("no motion values for {0}")]
    EmptyInput(DerivativeOrder),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DerivativeOrder {
    Velocity = 1,
    Acceleration = 2,
    Jerk = 3,
}

impl DerivativeOrder {
    pub const ALL: [DerivativeOrder; 3] =
        [DerivativeOrder::Velocity, DerivativeOrder::Acceleration, DerivativeOrder::Jerk];

    pub fn order(self) -> usize {
        self as usize
    }
}

impl fmt::Display for DerivativeOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DerivativeOrder::Velocity => "velocity",
            DerivativeOrder::Acceleration => "acceleration",
            DerivativeOrder::Jerk => "jerk",
        })
    }
}

/// How the 21 per-landmark derivative norms collapse to one value per frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LandmarkAggregation {
    #[default]
    Mean,
    Max,
    WristOnly,
}

impl LandmarkAggregation {
    fn apply(self, norms: &[f64; LANDMARK_COUNT]) -> f64 {
        match self {
            LandmarkAggregation::Mean => norms.iter().sum::<f64>() / LANDMARK_COUNT as f64,
            LandmarkAggregation::Max => norms.iter().copied().fold(0.0, f64::max),
            LandmarkAggregation::WristOnly => norms[0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MotionSeries {
    pub video_id: String,
    pub order: DerivativeOrder,
    /// `(timestamp_s, magnitude)`, stamped with the first frame of each difference.
    pub values: Vec<(f64, f64)>,
}

impl MotionSeries {
    pub fn magnitudes(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().map(|&(_, m)| m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Population (N-denominator) standard deviation.
    pub std: f64,
    pub count: usize,
}

impl MeanStd {
    /// Two-pass mean and population std; `None` for an empty slice.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Self { mean, std: var.sqrt(), count: values.len() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KinematicsSummary {
    pub velocity: MeanStd,
    pub acceleration: MeanStd,
    pub jerk: MeanStd,
    /// Per-video mean magnitude for each order, sorted by video id.
    pub per_video: Vec<VideoMotion>,
}

impl KinematicsSummary {
    pub fn get(&self, order: DerivativeOrder) -> &MeanStd {
        match order {
            DerivativeOrder::Velocity => &self.velocity,
            DerivativeOrder::Acceleration => &self.acceleration,
            DerivativeOrder::Jerk => &self.jerk,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VideoMotion {
    pub video_id: String,
    pub velocity: Option<f64>,
    pub acceleration: Option<f64>,
    pub jerk: Option<f64>,
}

type Skeleton = [[f64; 3]; LANDMARK_COUNT];

/// Contiguous runs of `(timestamp, landmarks)` where the selected hand is present.
fn hand_runs(track: &LandmarkTrack, selector: HandSelector) -> Vec<Vec<(f64, u64, Skeleton)>> {
    let resolved = selector.resolve(track);
    let mut runs = Vec::new();
    let mut current = Vec::new();
    for frame in &track.frames {
        match resolved.and_then(|h| frame.hand(h)) {
            Some(hand) => {
                let mut pts = [[0.0; 3]; LANDMARK_COUNT];
                for (dst, p) in pts.iter_mut().zip(&hand.points) {
                    *dst = p.to_array();
                }
                current.push((frame.timestamp_s, frame.frame_index, pts));
            }
            None if !current.is_empty() => runs.push(std::mem::take(&mut current)),
            None => {}
        }
    }
    if !current.is_empty() {
        runs.push(current);
    }
    runs
}

/// Per-frame derivative magnitudes of the selected hand.
///
/// Each order differences the previous one: `d[i] = (p[i+1] - p[i]) / (t[i+1] - t[i])`,
/// with `t` the original frame timestamps. Runs shorter than `order + 1` frames
/// contribute nothing; it is an error only if no run is long enough.
pub fn finite_difference(
    track: &LandmarkTrack,
    order: DerivativeOrder,
    selector: HandSelector,
    aggregation: LandmarkAggregation,
) -> Result<MotionSeries, KinematicsError> {
    let k = order.order();
    let mut values = Vec::new();
    let mut any_long_enough = false;

    for run in hand_runs(track, selector) {
        if run.len() < k + 1 {
            continue;
        }
        any_long_enough = true;
        for w in run.windows(2) {
            if w[1].0 - w[0].0 == 0.0 {
                return Err(KinematicsError::ZeroTimeStep {
                    video_id: track.video_id.clone(),
                    frame_index: w[1].1,
                });
            }
        }
        let times: Vec<f64> = run.iter().map(|r| r.0).collect();
        let mut level: Vec<Skeleton> = run.iter().map(|r| r.2).collect();
        for _ in 0..k {
            level = level
                .windows(2)
                .zip(times.windows(2))
                .map(|(p, t)| {
                    let dt = t[1] - t[0];
                    let mut d = [[0.0; 3]; LANDMARK_COUNT];
                    for (l, dl) in d.iter_mut().enumerate() {
                        for c in 0..3 {
                            dl[c] = (p[1][l][c] - p[0][l][c]) / dt;
                        }
                    }
                    d
                })
                .collect();
        }
        for (i, d) in level.iter().enumerate() {
            let mut norms = [0.0; LANDMARK_COUNT];
            for (n, v) in norms.iter_mut().zip(d) {
                *n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            }
            values.push((times[i], aggregation.apply(&norms)));
        }
    }

    if !any_long_enough {
        return Err(KinematicsError::TooShort { video_id: track.video_id.clone(), needed: k + 1 });
    }
    Ok(MotionSeries { video_id: track.video_id.clone(), order, values })
}

/// Mean and population std of derivative magnitudes pooled over every frame
/// of every track, per order. Tracks are reduced in sorted video-id order;
/// tracks too short for an order are skipped for that order.
pub fn summarize_kinematics(
    tracks: &[LandmarkTrack],
    selector: HandSelector,
    aggregation: LandmarkAggregation,
) -> Result<KinematicsSummary, KinematicsError> {
    let mut sorted: Vec<&LandmarkTrack> = tracks.iter().collect();
    sorted.sort_by(|a, b| a.video_id.cmp(&b.video_id));

    let mut pooled: [Vec<f64>; 3] = Default::default();
    let mut per_video = Vec::with_capacity(sorted.len());
    for t in sorted {
        let mut means = [None; 3];
        for (slot, order) in DerivativeOrder::ALL.into_iter().enumerate() {
            match finite_difference(t, order, selector, aggregation) {
                Ok(series) => {
                    let mags: Vec<f64> = series.magnitudes().collect();
                    means[slot] = MeanStd::of(&mags).map(|s| s.mean);
                    pooled[slot].extend(mags);
                }
                Err(KinematicsError::TooShort { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        per_video.push(VideoMotion {
            video_id: t.video_id.clone(),
            velocity: means[0],
            acceleration: means[1],
            jerk: means[2],
        });
    }

    let stat = |slot: usize| {
        MeanStd::of(&pooled[slot]).ok_or(KinematicsError::EmptyInput(DerivativeOrder::ALL[slot]))
    };
    Ok(KinematicsSummary { velocity: stat(0)?, acceleration: stat(1)?, jerk: stat(2)?, per_video })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::{FrameRecord, HandObservation, Handedness, LandmarkPoint};
    use proptest::prelude::*;

    /// Track whose 21 landmarks all sit at `offset(l) + pos(t)`.
    fn moving_track(times: &[f64], pos: impl Fn(f64) -> [f64; 3]) -> LandmarkTrack {
        let frames = times
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let p = pos(t);
                let mut points = [LandmarkPoint::default(); LANDMARK_COUNT];
                for (l, pt) in points.iter_mut().enumerate() {
                    *pt = LandmarkPoint::new(p[0] + l as f64 * 0.01, p[1] + l as f64 * 0.02, p[2]);
                }
                FrameRecord {
                    frame_index: i as u64,
                    timestamp_s: t,
                    hands: vec![HandObservation { handedness: Handedness::Right, confidence: 0.9, points }],
                }
            })
            .collect();
        LandmarkTrack { video_id: "t".into(), fps: 30.0, frames }
    }

    fn uniform(n: usize, fps: f64) -> Vec<f64> {
        (0..n).map(|i| i as f64 / fps).collect()
    }

    fn series(t: &LandmarkTrack, o: DerivativeOrder) -> Vec<f64> {
        finite_difference(t, o, HandSelector::MostConfident, LandmarkAggregation::Mean)
            .unwrap()
            .magnitudes()
            .collect()
    }

    #[test]
    fn stationary_hand_has_zero_derivatives() {
        let t = moving_track(&uniform(30, 30.0), |_| [0.3, 0.4, 0.0]);
        for o in DerivativeOrder::ALL {
            let s = series(&t, o);
            assert_eq!(s.len(), 30 - o.order());
            assert!(s.iter().all(|&m| m == 0.0));
        }
    }

    #[test]
    fn constant_velocity_translation() {
        let t = moving_track(&uniform(30, 30.0), |t| [0.1 * t, 0.0, 0.0]);
        assert!(series(&t, DerivativeOrder::Velocity).iter().all(|m| (m - 0.1).abs() < 1e-12));
        assert!(series(&t, DerivativeOrder::Acceleration).iter().all(|m| m.abs() < 1e-9));
        assert!(series(&t, DerivativeOrder::Jerk).iter().all(|m| m.abs() < 1e-6));
    }

    #[test]
    fn gaps_split_runs() {
        let mut t = moving_track(&uniform(10, 30.0), |t| [t, 0.0, 0.0]);
        t.frames[4].hands.clear();
        // runs of 4 and 5 frames
        let v = series(&t, DerivativeOrder::Velocity);
        assert_eq!(v.len(), 3 + 4);
        let j = series(&t, DerivativeOrder::Jerk);
        assert_eq!(j.len(), 1 + 2);
    }

    #[test]
    fn too_short_and_zero_step() {
        let t = moving_track(&uniform(3, 30.0), |t| [t, 0.0, 0.0]);
        assert!(matches!(
            finite_difference(&t, DerivativeOrder::Jerk, HandSelector::MostConfident, LandmarkAggregation::Mean),
            Err(KinematicsError::TooShort { needed: 4, .. })
        ));
        let t = moving_track(&[0.0, 0.1, 0.1, 0.2], |t| [t, 0.0, 0.0]);
        assert!(matches!(
            finite_difference(&t, DerivativeOrder::Velocity, HandSelector::MostConfident, LandmarkAggregation::Mean),
            Err(KinematicsError::ZeroTimeStep { frame_index: 2, .. })
        ));
    }

    #[test]
    fn aggregation_options() {
        let mut t = moving_track(&uniform(4, 10.0), |_| [0.0; 3]);
        // only the index tip (8) moves, 0.2 units per frame at 10 fps -> 2.0/s
        for (i, f) in t.frames.iter_mut().enumerate() {
            f.hands[0].points[8].x += 0.2 * i as f64;
        }
        let run = |a| {
            finite_difference(&t, DerivativeOrder::Velocity, HandSelector::MostConfident, a)
                .unwrap()
                .values[0]
                .1
        };
        assert!((run(LandmarkAggregation::Max) - 2.0).abs() < 1e-12);
        assert!((run(LandmarkAggregation::Mean) - 2.0 / 21.0).abs() < 1e-12);
        assert_eq!(run(LandmarkAggregation::WristOnly), 0.0);
    }

    #[test]
    fn two_point_summary_and_duplication() {
        // positions 0, 0.2, 0.6 at 1 fps -> velocities 0.2, 0.4
        let t = moving_track(&[0.0, 1.0, 2.0], |t| [if t < 0.5 { 0.0 } else if t < 1.5 { 0.2 } else { 0.6 }, 0.0, 0.0]);
        let v = MeanStd::of(&series(&t, DerivativeOrder::Velocity)).unwrap();
        assert!((v.mean - 0.3).abs() < 1e-12 && (v.std - 0.1).abs() < 1e-12);

        let long = moving_track(&uniform(12, 30.0), |t| [t * t, (3.0 * t).sin(), 0.0]);
        let one = summarize_kinematics(std::slice::from_ref(&long), HandSelector::MostConfident, LandmarkAggregation::Mean).unwrap();
        let two = summarize_kinematics(&[long.clone(), long], HandSelector::MostConfident, LandmarkAggregation::Mean).unwrap();
        for o in DerivativeOrder::ALL {
            let (a, b) = (one.get(o), two.get(o));
            assert!((a.mean - b.mean).abs() <= 1e-12 * a.mean.abs().max(1.0));
            assert!((a.std - b.std).abs() <= 1e-12 * a.std.abs().max(1.0));
            assert_eq!(b.count, 2 * a.count);
        }
    }

    #[test]
    fn summary_rejects_empty() {
        let t = moving_track(&uniform(2, 30.0), |t| [t, 0.0, 0.0]);
        assert!(matches!(
            summarize_kinematics(&[t], HandSelector::MostConfident, LandmarkAggregation::Mean),
            Err(KinematicsError::EmptyInput(DerivativeOrder::Acceleration))
        ));
    }

    fn rotate(p: [f64; 3], (a, b): (f64, f64)) -> [f64; 3] {
        // rotation about z by a, then about x by b
        let (sa, ca) = a.sin_cos();
        let (sb, cb) = b.sin_cos();
        let q = [ca * p[0] - sa * p[1], sa * p[0] + ca * p[1], p[2]];
        [q[0], cb * q[1] - sb * q[2], sb * q[1] + cb * q[2]]
    }

    fn transform(t: &LandmarkTrack, f: impl Fn([f64; 3]) -> [f64; 3]) -> LandmarkTrack {
        let mut out = t.clone();
        for fr in &mut out.frames {
            for h in &mut fr.hands {
                for p in &mut h.points {
                    *p = f(p.to_array()).into();
                }
            }
        }
        out
    }

    proptest! {
        #[test]
        fn time_rescaling_scales_by_powers(c in 0.1f64..10.0, w in 0.5f64..4.0) {
            let base = moving_track(&uniform(20, 30.0), |t| [(w * t).sin(), (w * t).cos() * 0.5, t * 0.1]);
            let mut scaled = base.clone();
            scaled.frames.iter_mut().for_each(|f| f.timestamp_s *= c);
            for o in DerivativeOrder::ALL {
                let (a, b) = (series(&base, o), series(&scaled, o));
                for (x, y) in a.iter().zip(&b) {
                    let expect = x / c.powi(o.order() as i32);
                    prop_assert!((y - expect).abs() <= 1e-9 * expect.abs().max(1e-300));
                }
            }
        }

        #[test]
        fn rigid_motions_preserve_magnitudes(dx in -1.0f64..1.0, dy in -1.0f64..1.0, a in 0.0f64..6.3, b in 0.0f64..6.3) {
            let base = moving_track(&uniform(15, 30.0), |t| [t * t, (2.0 * t).sin(), 0.3 * t]);
            let moved = transform(&base, |p| { let r = rotate(p, (a, b)); [r[0] + dx, r[1] + dy, r[2]] });
            for o in DerivativeOrder::ALL {
                for (x, y) in series(&base, o).iter().zip(&series(&moved, o)) {
                    prop_assert!((x - y).abs() <= 1e-6 * x.abs().max(1.0));
                }
            }
        }

        #[test]
        fn reversal_preserves_velocity_multiset(w in 0.5f64..4.0) {
            let times = uniform(16, 30.0);
            let base = moving_track(&times, |t| [(w * t).sin(), t * t, 0.0]);
            let mut rev = base.clone();
            let positions: Vec<_> = rev.frames.iter().map(|f| f.hands.clone()).collect();
            for (f, h) in rev.frames.iter_mut().zip(positions.into_iter().rev()) {
                f.hands = h;
            }
            let mut a = series(&base, DerivativeOrder::Velocity);
            let mut b = series(&rev, DerivativeOrder::Velocity);
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn halving_step_reduces_error() {
        // x(t) = sin(2 pi t); forward-difference error is O(dt)
        let w = 2.0 * std::f64::consts::PI;
        let max_err = |fps: f64| {
            let times = uniform((2.0 * fps) as usize + 1, fps);
            let t = moving_track(&times, |t| [(w * t).sin(), 0.0, 0.0]);
            let s = finite_difference(&t, DerivativeOrder::Velocity, HandSelector::MostConfident, LandmarkAggregation::Mean).unwrap();
            s.values.iter().map(|&(t, m)| (m - (w * (w * t).cos()).abs()).abs()).fold(0.0, f64::max)
        };
        let (coarse, fine) = (max_err(30.0), max_err(60.0));
        assert!(fine < coarse, "{fine} !< {coarse}");
        assert!(fine < 0.6 * coarse);
    }
}
