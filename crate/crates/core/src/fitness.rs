//! Fitness computation: extrinsic episode return, discounted curiosity
//! fitness over a trajectory, and the per-population normalized blend of the
//! two channels.

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::icm::Icm;
use crate::maze::Trajectory;

/// Per-individual fitness components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitnessRecord {
    pub index: usize,
    pub extrinsic: f64,
    pub intrinsic: f64,
    pub total: f64,
}

/// Episode return: the sum of rewards.
pub fn extrinsic_fitness(trajectory: &Trajectory) -> f64 {
    trajectory.total_reward()
}

/// Discounted sum of per-transition errors with the LAST transition weighted
/// `gamma^0 = 1` and earlier ones down-weighted: `sum_t gamma^(L-1-t) e_t`.
/// `gamma = 0` (with `0^0 = 1`) keeps only the final transition.
pub fn discounted_curiosity(errors: &[f64], gamma: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidParameter(format!(
            "gamma must be in [0, 1], got {gamma}"
        )));
    }
    let mut acc = 0.0;
    let mut weight = 1.0;
    for e in errors.iter().rev() {
        acc += weight * e;
        weight *= gamma;
    }
    Ok(acc)
}

/// Curiosity fitness of a trajectory: the discounted sum of forward-model
/// prediction errors (no eta/2 factor). An empty trajectory scores 0 with a
/// warning.
pub fn curiosity_fitness(icm: &Icm, trajectory: &Trajectory, gamma: f64) -> Result<f64> {
    if trajectory.is_empty() {
        log::warn!("curiosity_fitness on an empty trajectory; returning 0");
        return Ok(0.0);
    }
    let errors = trajectory_forward_errors(icm, trajectory)?;
    discounted_curiosity(&errors, gamma)
}

/// Batched forward-model errors for every transition of a trajectory.
pub fn trajectory_forward_errors(icm: &Icm, trajectory: &Trajectory) -> Result<Vec<f64>> {
    let n = trajectory.len();
    let state_dim = icm.state_dim();
    let action_dim = icm.action_dim();
    let mut s = Array2::zeros((n, state_dim));
    let mut a = Array2::zeros((n, action_dim));
    let mut sp = Array2::zeros((n, state_dim));
    for i in 0..n {
        let (st, act, next) = trajectory.transition(i);
        if st.len() != state_dim {
            return Err(Error::Dimension {
                context: "trajectory state",
                expected: state_dim,
                actual: st.len(),
            });
        }
        s.row_mut(i).assign(&ndarray::ArrayView1::from(st));
        a.row_mut(i).assign(&ndarray::ArrayView1::from(&act[..]));
        sp.row_mut(i).assign(&ndarray::ArrayView1::from(next));
    }
    icm.forward_errors(s.view(), a.view(), sp.view())
}

/// Blends extrinsic and intrinsic fitness after per-population z-scoring:
/// `phi * z_e + (1 - phi) * z_i`.
///
/// Statistics are computed over the current population with the biased (1/N)
/// standard deviation. A channel whose values are all equal contributes 0.
/// When every extrinsic value is exactly 0 (no reward found yet), the
/// extrinsic values are replaced by i.i.d. standard-normal draws before
/// normalization.
pub fn combine_fitness<R: Rng>(
    records: &[(f64, f64)],
    phi: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if records.len() < 2 {
        return Err(Error::TooFewRecords {
            needed: 2,
            got: records.len(),
        });
    }
    if !(0.0..=1.0).contains(&phi) {
        return Err(Error::InvalidParameter(format!(
            "phi must be in [0, 1], got {phi}"
        )));
    }

    let mut extrinsic: Vec<f64> = records.iter().map(|r| r.0).collect();
    let intrinsic: Vec<f64> = records.iter().map(|r| r.1).collect();
    if extrinsic.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("extrinsic fitness"));
    }

    if extrinsic.iter().all(|&v| v == 0.0) {
        for v in &mut extrinsic {
            *v = rng.sample(StandardNormal);
        }
    }

    let ze = zscores(&extrinsic)?;
    let zi = zscores(&intrinsic)?;
    Ok(ze
        .iter()
        .zip(&zi)
        .map(|(e, i)| phi * e + (1.0 - phi) * i)
        .collect())
}

/// Population z-scores with the biased standard deviation; an all-equal
/// channel (including all infinite, e.g. novelty against an empty archive)
/// maps to all zeros.
fn zscores(values: &[f64]) -> Result<Vec<f64>> {
    let all_equal = values.windows(2).all(|w| w[0] == w[1]);
    if all_equal {
        return Ok(vec![0.0; values.len()]);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("fitness channel"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sd = var.sqrt();
    if sd == 0.0 {
        return Ok(vec![0.0; values.len()]);
    }
    Ok(values.iter().map(|v| (v - mean) / sd).collect())
}
