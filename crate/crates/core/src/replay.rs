//! Bounded FIFO transition store feeding ICM training.
//!
//! Each evaluated individual contributes at most `m` transitions, sampled
//! uniformly without replacement over its trajectory; the oldest transitions
//! are evicted once the store is full.

use std::collections::VecDeque;
use std::io::Write;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::maze::Trajectory;

/// One environment transition (s, a, s').
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub next_state: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    transitions: VecDeque<Transition>,
    capacity: usize,
    m_per_individual: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, m_per_individual: usize) -> Result<Self> {
        if capacity == 0 || m_per_individual == 0 {
            return Err(Error::InvalidParameter(
                "replay buffer capacity and m must be positive".into(),
            ));
        }
        Ok(Self {
            transitions: VecDeque::with_capacity(capacity.min(1 << 20)),
            capacity,
            m_per_individual,
        })
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn m_per_individual(&self) -> usize {
        self.m_per_individual
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.transitions[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.transitions.iter()
    }

    fn push(&mut self, t: Transition) {
        if self.transitions.len() == self.capacity {
            self.transitions.pop_front();
        }
        self.transitions.push_back(t);
    }

    /// Adds `min(m, |traj|)` transitions drawn uniformly without replacement,
    /// appended in trajectory order.
    pub fn add_from_trajectory<R: Rng>(&mut self, traj: &Trajectory, rng: &mut R) {
        let n = traj.len();
        if n == 0 {
            return;
        }
        let k = self.m_per_individual.min(n);
        let mut picked = sample_without_replacement(n, k, rng);
        picked.sort_unstable();
        for i in picked {
            let (s, a, sp) = traj.transition(i);
            self.push(Transition {
                state: s.to_vec(),
                action: a.to_vec(),
                next_state: sp.to_vec(),
            });
        }
    }

    /// Uniform sample of `batch_size` transitions: without replacement when
    /// the buffer is large enough, with replacement otherwise.
    pub fn sample_batch<R: Rng>(&self, batch_size: usize, rng: &mut R) -> Result<Vec<&Transition>> {
        if self.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        let n = self.transitions.len();
        let indices = if batch_size <= n {
            sample_without_replacement(n, batch_size, rng)
        } else {
            (0..batch_size).map(|_| rng.gen_range(0..n)).collect()
        };
        Ok(indices.into_iter().map(|i| &self.transitions[i]).collect())
    }

    /// Flat binary dump for post-hoc analysis: per record the little-endian
    /// f64 values of s, a, s'.
    pub fn dump_binary(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        for t in &self.transitions {
            for v in t.state.iter().chain(&t.action).chain(&t.next_state) {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// First `k` elements of a partial Fisher-Yates shuffle of `0..n`.
fn sample_without_replacement<R: Rng>(n: usize, k: usize, rng: &mut R) -> Vec<usize> {
    debug_assert!(k <= n);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.gen_range(i..n);
        idx.swap(i, j);
    }
    idx.truncate(k);
    idx
}
