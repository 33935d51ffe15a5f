use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DistanceMatrix, DiversityError};

const PERPLEXITY_TOL: f64 = 1e-5;
const BANDWIDTH_STEPS: usize = 50;
const INIT_SCALE: f64 = 1e-4;
const P_FLOOR: f64 = 1e-12;
const MIN_GAIN: f64 = 0.01;

/// Exact t-SNE settings. The output is always two-dimensional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    /// Iterations run with the initial momentum.
    pub momentum_switch: usize,
    pub early_exaggeration: f64,
    /// Iterations run with exaggerated affinities.
    pub exaggeration_iterations: usize,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 10.0,
            iterations: 1000,
            learning_rate: 200.0,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            momentum_switch: 250,
            early_exaggeration: 12.0,
            exaggeration_iterations: 250,
            seed: 0,
        }
    }
}

impl TsneConfig {
    fn check(&self, n: usize) -> Result<(), DiversityError> {
        if n < 4 {
            return Err(DiversityError::TooFewPoints { needed: 4, got: n });
        }
        let max = (n as f64 - 1.0) / 3.0;
        if self.perplexity.is_nan() || self.perplexity <= 0.0 || self.perplexity >= max {
            return Err(DiversityError::PerplexityTooHigh { perplexity: self.perplexity, max, n });
        }
        let bad = |what: &str| Err(DiversityError::InvalidConfig(what.into()));
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.initial_momentum) || !(0.0..1.0).contains(&self.final_momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        if self.early_exaggeration.is_nan() || self.early_exaggeration < 1.0 {
            return bad("early_exaggeration must be at least 1");
        }
        Ok(())
    }
}

/// A point whose bandwidth search stopped before reaching the target perplexity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandwidthWarning {
    pub id: String,
    pub achieved_perplexity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TsneOutput {
    /// Input order.
    pub ids: Vec<String>,
    pub points: Vec<[f64; 2]>,
    /// KL(P‖Q) at the initial layout, without exaggeration.
    pub kl_initial: f64,
    pub kl_final: f64,
    pub warnings: Vec<BandwidthWarning>,
}

/// Exact t-SNE on precomputed distances, which take the place of squared
/// Euclidean distances in the input affinities. Points are processed in
/// sorted-id order, so permuting the input permutes the output.
pub fn tsne_from_distances(m: &DistanceMatrix, cfg: &TsneConfig) -> Result<TsneOutput, DiversityError> {
    let n = m.len();
    cfg.check(n)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| m.ids()[a].cmp(&m.ids()[b]));
    let dist: Vec<f64> = order.iter().flat_map(|&i| order.iter().map(move |&j| m.get(i, j))).collect();

    let rows: Vec<(Vec<f64>, Option<f64>)> =
        (0..n).into_par_iter().map(|i| conditional_row(&dist[i * n..(i + 1) * n], i, cfg.perplexity)).collect();
    let mut warnings = Vec::new();
    for (r, (_, miss)) in rows.iter().enumerate() {
        if let Some(achieved) = miss {
            warnings.push(BandwidthWarning { id: m.ids()[order[r]].clone(), achieved_perplexity: *achieved });
        }
    }
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                p[i * n + j] = ((rows[i].0[j] + rows[j].0[i]) / (2.0 * n as f64)).max(P_FLOOR);
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut y: Vec<[f64; 2]> =
        (0..n).map(|_| [INIT_SCALE * rng.sample::<f64, _>(StandardNormal), INIT_SCALE * rng.sample::<f64, _>(StandardNormal)]).collect();
    let mut update = vec![[0.0; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let kl_initial = kl(&p, &y);

    for it in 0..cfg.iterations {
        let exaggeration = if it < cfg.exaggeration_iterations { cfg.early_exaggeration } else { 1.0 };
        let momentum = if it < cfg.momentum_switch { cfg.initial_momentum } else { cfg.final_momentum };
        let grad = gradient(&p, &y, exaggeration);
        for i in 0..n {
            for d in 0..2 {
                let g = grad[i][d];
                gains[i][d] = if (g > 0.0) != (update[i][d] > 0.0) { gains[i][d] + 0.2 } else { gains[i][d] * 0.8 };
                gains[i][d] = gains[i][d].max(MIN_GAIN);
                update[i][d] = momentum * update[i][d] - cfg.learning_rate * gains[i][d] * g;
                y[i][d] += update[i][d];
            }
        }
        for d in 0..2 {
            let mean = y.iter().map(|q| q[d]).sum::<f64>() / n as f64;
            for q in y.iter_mut() {
                q[d] -= mean;
            }
        }
    }
    let kl_final = kl(&p, &y);

    let mut points = vec![[0.0; 2]; n];
    for (r, &i) in order.iter().enumerate() {
        points[i] = y[r];
    }
    Ok(TsneOutput { ids: m.ids().to_vec(), points, kl_initial, kl_final, warnings })
}

/// Conditional affinities `p_{j|i}` for one row, with the achieved perplexity
/// when the bandwidth search did not converge.
fn conditional_row(d: &[f64], i: usize, perplexity: f64) -> (Vec<f64>, Option<f64>) {
    let target = perplexity.ln();
    let (mut beta, mut lo, mut hi) = (1.0f64, f64::NEG_INFINITY, f64::INFINITY);
    let mut row = vec![0.0; d.len()];
    for _ in 0..BANDWIDTH_STEPS {
        let entropy = fill_row(d, i, beta, &mut row);
        let diff = entropy - target;
        if diff.abs() < PERPLEXITY_TOL {
            return (row, None);
        }
        if diff > 0.0 {
            lo = beta;
            beta = if hi.is_finite() { 0.5 * (beta + hi) } else { beta * 2.0 };
        } else {
            hi = beta;
            beta = if lo.is_finite() { 0.5 * (beta + lo) } else { beta / 2.0 };
        }
    }
    let entropy = fill_row(d, i, beta, &mut row);
    (row, Some(entropy.exp()))
}

/// Writes normalized `exp(-β d)` into `row` and returns its Shannon entropy (nats).
fn fill_row(d: &[f64], i: usize, beta: f64, row: &mut [f64]) -> f64 {
    // Shift by the smallest off-diagonal distance so the largest weight is 1.
    let dmin = d.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &v)| v).fold(f64::INFINITY, f64::min);
    let mut sum = 0.0;
    for (j, (&dj, r)) in d.iter().zip(row.iter_mut()).enumerate() {
        *r = if j == i { 0.0 } else { (-beta * (dj - dmin)).exp() };
        sum += *r;
    }
    let mut h = 0.0;
    for r in row.iter_mut() {
        *r /= sum;
        if *r > 0.0 {
            h -= *r * r.ln();
        }
    }
    h
}

fn student_t(y: &[[f64; 2]]) -> (Vec<f64>, f64) {
    let n = y.len();
    let num: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            (0..n).map(move |j| {
                if i == j {
                    0.0
                } else {
                    let (dx, dy) = (y[i][0] - y[j][0], y[i][1] - y[j][1]);
                    1.0 / (1.0 + dx * dx + dy * dy)
                }
            })
        })
        .collect();
    let z = num.iter().sum();
    (num, z)
}

fn gradient(p: &[f64], y: &[[f64; 2]], exaggeration: f64) -> Vec<[f64; 2]> {
    let n = y.len();
    let (num, z) = student_t(y);
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut g = [0.0; 2];
            for j in 0..n {
                if i == j {
                    continue;
                }
                let w = (exaggeration * p[i * n + j] - num[i * n + j] / z) * num[i * n + j];
                g[0] += w * (y[i][0] - y[j][0]);
                g[1] += w * (y[i][1] - y[j][1]);
            }
            [4.0 * g[0], 4.0 * g[1]]
        })
        .collect()
}

fn kl(p: &[f64], y: &[[f64; 2]]) -> f64 {
    let (num, z) = student_t(y);
    let n = y.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let q = (num[i * n + j] / z).max(P_FLOOR);
                total += p[i * n + j] * (p[i * n + j] / q).ln();
            }
        }
    }
    total
}
