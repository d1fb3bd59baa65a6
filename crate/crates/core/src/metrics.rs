//! Experiment metrics: discretized final-position coverage, best-reward
//! curves, policy fingerprints over the last states of an episode, and a
//! two-component PCA by power iteration with deflation.

use std::collections::HashSet;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::maze::Trajectory;

/// Number of trailing states in a policy fingerprint.
pub const FINGERPRINT_STATES: usize = 300;

/// Grid of visited cells over a 2D region; occupancy only grows.
#[derive(Debug, Clone)]
pub struct CoverageGrid {
    resolution: usize,
    x_bounds: (f64, f64),
    y_bounds: (f64, f64),
    occupied: HashSet<(u16, u16)>,
}

impl CoverageGrid {
    pub fn new(resolution: usize, x_bounds: (f64, f64), y_bounds: (f64, f64)) -> Result<Self> {
        if resolution == 0 || resolution > u16::MAX as usize {
            return Err(Error::InvalidParameter("coverage resolution out of range".into()));
        }
        if x_bounds.0 >= x_bounds.1 || y_bounds.0 >= y_bounds.1 {
            return Err(Error::InvalidParameter("coverage bounds must satisfy lo < hi".into()));
        }
        Ok(Self {
            resolution,
            x_bounds,
            y_bounds,
            occupied: HashSet::new(),
        })
    }

    fn cell(&self, v: f64, bounds: (f64, f64)) -> u16 {
        let frac = ((v - bounds.0) / (bounds.1 - bounds.0)).clamp(0.0, 1.0);
        ((frac * self.resolution as f64) as usize).min(self.resolution - 1) as u16
    }

    /// Marks the cell containing `(x, y)`, clamping at the bounds.
    pub fn update(&mut self, x: f64, y: f64) {
        let cx = self.cell(x, self.x_bounds);
        let cy = self.cell(y, self.y_bounds);
        self.occupied.insert((cx, cy));
    }

    pub fn occupied_cells(&self) -> usize {
        self.occupied.len()
    }

    /// Occupied fraction in [0, 1].
    pub fn fraction(&self) -> f64 {
        self.occupied.len() as f64 / (self.resolution * self.resolution) as f64
    }

    /// Occupied percentage in [0, 100].
    pub fn percent(&self) -> f64 {
        100.0 * self.fraction()
    }
}

/// Running maximum of per-generation best extrinsic fitness.
pub fn best_reward_curve(per_generation_max: &[f64]) -> Vec<f64> {
    let mut best = f64::NEG_INFINITY;
    per_generation_max
        .iter()
        .map(|&v| {
            best = best.max(v);
            best
        })
        .collect()
}

/// Flattened trailing states of a rewarding policy's episode, plus labels.
#[derive(Debug, Clone)]
pub struct PolicyFingerprint {
    /// `FINGERPRINT_STATES * state_dim` values; episodes shorter than the
    /// window are front-padded by repeating their first recorded state.
    pub data: Vec<f64>,
    pub fitness: f64,
    pub algorithm: String,
    pub generation: usize,
}

impl PolicyFingerprint {
    pub fn from_trajectory(
        traj: &Trajectory,
        fitness: f64,
        algorithm: &str,
        generation: usize,
    ) -> Self {
        let states = traj.states();
        let state_dim = states.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(FINGERPRINT_STATES * state_dim);
        let n = states.len();
        if n >= FINGERPRINT_STATES {
            for s in &states[n - FINGERPRINT_STATES..] {
                data.extend_from_slice(s);
            }
        } else {
            for _ in 0..FINGERPRINT_STATES - n {
                data.extend_from_slice(&states[0]);
            }
            for s in states {
                data.extend_from_slice(s);
            }
        }
        Self {
            data,
            fitness,
            algorithm: algorithm.to_string(),
            generation,
        }
    }
}

/// Result of a rank-2 PCA.
#[derive(Debug, Clone)]
pub struct Pca2 {
    /// Per-row projections onto the two components.
    pub projections: Vec<(f64, f64)>,
    /// Unit-norm components, sign-fixed so the largest-magnitude loading is
    /// positive.
    pub components: (Vec<f64>, Vec<f64>),
    /// Fraction of total variance captured by each component.
    pub explained: (f64, f64),
}

/// Top-2 PCA by power iteration with deflation.
///
/// Rows are observations. Data is centered first; zero-variance data yields
/// all-zero projections. Needs at least 3 rows.
pub fn pca_top2(rows: &Array2<f64>) -> Result<Pca2> {
    let n = rows.nrows();
    if n < 3 {
        return Err(Error::TooFewRecords { needed: 3, got: n });
    }
    let d = rows.ncols();
    let mean = rows.mean_axis(ndarray::Axis(0)).expect("nonempty");
    let centered = rows - &mean.broadcast((n, d)).expect("broadcast");

    let total_var: f64 = centered.iter().map(|x| x * x).sum();
    if total_var == 0.0 {
        return Ok(Pca2 {
            projections: vec![(0.0, 0.0); n],
            components: (vec![0.0; d], vec![0.0; d]),
            explained: (0.0, 0.0),
        });
    }

    let c1 = power_component(&centered, None);
    let scores1 = centered.dot(&c1);
    // Deflate: remove the rank-1 structure along c1.
    let deflated = &centered - &outer(&scores1, &c1);
    let c2 = power_component(&deflated, Some(&c1));
    let scores2 = centered.dot(&c2);

    let (c1, scores1) = fix_sign(c1, scores1);
    let (c2, scores2) = fix_sign(c2, scores2);

    let ev1 = scores1.iter().map(|x| x * x).sum::<f64>() / total_var;
    let ev2 = scores2.iter().map(|x| x * x).sum::<f64>() / total_var;

    Ok(Pca2 {
        projections: scores1.iter().zip(scores2.iter()).map(|(&a, &b)| (a, b)).collect(),
        components: (c1.to_vec(), c2.to_vec()),
        explained: (ev1, ev2),
    })
}

fn outer(col: &Array1<f64>, row: &Array1<f64>) -> Array2<f64> {
    let n = col.len();
    let d = row.len();
    Array2::from_shape_fn((n, d), |(i, j)| col[i] * row[j])
}

/// Dominant right-singular direction of `x` by power iteration on `x^T x`.
/// Re-orthogonalizes against `against` (numerical guard alongside deflation).
fn power_component(x: &Array2<f64>, against: Option<&Array1<f64>>) -> Array1<f64> {
    let d = x.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(0x9ca_2024);
    let mut v = Array1::from_shape_fn(d, |_| rng.gen_range(-1.0..1.0f64));
    normalize(&mut v);
    let mut prev = v.clone();
    for _ in 0..50_000 {
        let mut w = x.t().dot(&x.dot(&v));
        if let Some(a) = against {
            let proj = w.dot(a);
            w.scaled_add(-proj, a);
        }
        let norm = w.dot(&w).sqrt();
        if norm == 0.0 {
            // No variance left in this subspace.
            return Array1::zeros(d);
        }
        v = w / norm;
        let delta = (&v - &prev).iter().map(|x| x.abs()).fold(0.0, f64::max);
        if delta < 1e-15 {
            break;
        }
        prev = v.clone();
    }
    v
}

fn normalize(v: &mut Array1<f64>) {
    let n = v.dot(v).sqrt();
    if n > 0.0 {
        *v /= n;
    }
}

/// Makes the largest-magnitude loading positive, flipping scores to match.
fn fix_sign(mut c: Array1<f64>, mut scores: Array1<f64>) -> (Array1<f64>, Array1<f64>) {
    let mut max_idx = 0;
    let mut max_abs = 0.0;
    for (i, &x) in c.iter().enumerate() {
        if x.abs() > max_abs {
            max_abs = x.abs();
            max_idx = i;
        }
    }
    if c[max_idx] < 0.0 {
        c.mapv_inplace(|x| -x);
        scores.mapv_inplace(|x| -x);
    }
    (c, scores)
}
