//! Canonical evolution strategy.
//!
//! A fixed-sigma Gaussian ES: sample `lambda` individuals around the center,
//! rank them by fitness, and move the center along a log-rank-weighted
//! average of the `mu` best displacements, scaled by `1/(sigma*mu)` and a
//! learning rate `alpha`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distinct ChaCha stream ids, so that algorithm variants consume identical
/// random sequences for the components they share.
pub mod stream {
    /// Population sampling.
    pub const ES: u64 = 1;
    /// Random extrinsic-fitness fallback draws.
    pub const FITNESS: u64 = 2;
    /// Replay-buffer subsampling.
    pub const BUFFER: u64 = 3;
    /// ICM weight init and epoch shuffling.
    pub const ICM: u64 = 4;
    /// Policy/center initialization.
    pub const INIT: u64 = 5;
    /// MAP-Elites bootstrap, selection, and mutation.
    pub const MAP_ELITES: u64 = 6;
}

/// Seeded RNG on a dedicated stream.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// ES distribution state: center, spread, selection sizes, and the sampling
/// RNG.
#[derive(Debug, Clone)]
pub struct EsState {
    center: Vec<f64>,
    pub sigma: f64,
    pub lambda: usize,
    pub mu: usize,
    pub alpha: f64,
    pub generation: usize,
    rng: ChaCha8Rng,
}

impl EsState {
    pub fn new(
        center: Vec<f64>,
        sigma: f64,
        lambda: usize,
        mu: usize,
        alpha: f64,
        seed: u64,
    ) -> Result<Self> {
        if mu == 0 || lambda == 0 || mu > lambda {
            return Err(Error::InvalidParameter(format!(
                "need 1 <= mu <= lambda, got mu={mu}, lambda={lambda}"
            )));
        }
        if sigma <= 0.0 || alpha <= 0.0 {
            return Err(Error::InvalidParameter(
                "sigma and alpha must be positive".into(),
            ));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("ES center"));
        }
        Ok(Self {
            center,
            sigma,
            lambda,
            mu,
            alpha,
            generation: 0,
            rng: stream_rng(seed, stream::ES),
        })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Draws `lambda` individuals `center + sigma * eps`, eps standard normal
    /// per coordinate. Advances the sampling RNG.
    pub fn sample_population(&mut self) -> Vec<Vec<f64>> {
        let mut pop = Vec::with_capacity(self.lambda);
        for _ in 0..self.lambda {
            let individual: Vec<f64> = self
                .center
                .iter()
                .map(|&c| {
                    let eps: f64 = self.rng.sample(StandardNormal);
                    c + self.sigma * eps
                })
                .collect();
            pop.push(individual);
        }
        pop
    }

    /// Gradient estimate from the `mu` best individuals, sorted by descending
    /// fitness: `(1/(sigma*mu)) * sum_j w_j (elite_j - center)`.
    pub fn estimate_gradient(&self, ranked_elites: &[&[f64]], weights: &RankWeights) -> Result<Vec<f64>> {
        if ranked_elites.len() != self.mu || weights.len() != self.mu {
            return Err(Error::Dimension {
                context: "estimate_gradient elites",
                expected: self.mu,
                actual: ranked_elites.len(),
            });
        }
        let mut grad = vec![0.0; self.center.len()];
        for (elite, &w) in ranked_elites.iter().zip(weights.as_slice()) {
            if elite.len() != self.center.len() {
                return Err(Error::Dimension {
                    context: "estimate_gradient elite dim",
                    expected: self.center.len(),
                    actual: elite.len(),
                });
            }
            for ((g, &e), &c) in grad.iter_mut().zip(elite.iter()).zip(&self.center) {
                *g += w * (e - c);
            }
        }
        let scale = 1.0 / (self.sigma * self.mu as f64);
        for g in &mut grad {
            *g *= scale;
        }
        Ok(grad)
    }

    /// Moves the center by `alpha * gradient` and advances the generation.
    pub fn update_center(&mut self, gradient: &[f64]) -> Result<()> {
        if gradient.len() != self.center.len() {
            return Err(Error::Dimension {
                context: "update_center gradient",
                expected: self.center.len(),
                actual: gradient.len(),
            });
        }
        if gradient.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("ES gradient"));
        }
        for (c, g) in self.center.iter_mut().zip(gradient) {
            *c += self.alpha * g;
        }
        self.generation += 1;
        Ok(())
    }

    pub fn to_checkpoint(&self) -> EsCheckpoint {
        EsCheckpoint {
            center: self.center.clone(),
            sigma: self.sigma,
            lambda: self.lambda,
            mu: self.mu,
            alpha: self.alpha,
            generation: self.generation,
            rng_seed: self.rng.get_seed(),
            rng_stream: self.rng.get_stream(),
            rng_word_pos: self.rng.get_word_pos(),
        }
    }

    pub fn from_checkpoint(ck: EsCheckpoint) -> Result<Self> {
        let mut rng = ChaCha8Rng::from_seed(ck.rng_seed);
        rng.set_stream(ck.rng_stream);
        rng.set_word_pos(ck.rng_word_pos);
        let mut state = Self::new(ck.center, ck.sigma, ck.lambda, ck.mu, ck.alpha, 0)?;
        state.generation = ck.generation;
        state.rng = rng;
        Ok(state)
    }
}

/// Serializable ES state, including the exact RNG position.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EsCheckpoint {
    pub center: Vec<f64>,
    pub sigma: f64,
    pub lambda: usize,
    pub mu: usize,
    pub alpha: f64,
    pub generation: usize,
    pub rng_seed: [u8; 32],
    pub rng_stream: u64,
    pub rng_word_pos: u128,
}

/// Log-rank recombination weights:
/// `w_j = (log(mu+0.5) - log j) / sum_i (log(mu+0.5) - log i)`, j in 1..=mu.
#[derive(Debug, Clone, PartialEq)]
pub struct RankWeights(Vec<f64>);

impl RankWeights {
    pub fn new(mu: usize) -> Result<Self> {
        if mu == 0 {
            return Err(Error::InvalidParameter("rank weights need mu >= 1".into()));
        }
        let log_base = (mu as f64 + 0.5).ln();
        let raw: Vec<f64> = (1..=mu).map(|j| log_base - (j as f64).ln()).collect();
        let norm: f64 = raw.iter().sum();
        Ok(Self(raw.into_iter().map(|w| w / norm).collect()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Indices sorted by descending fitness; ties keep the lower index first.
pub fn rank_indices(fitness: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..fitness.len()).collect();
    idx.sort_by(|&a, &b| fitness[b].total_cmp(&fitness[a]));
    idx
}
