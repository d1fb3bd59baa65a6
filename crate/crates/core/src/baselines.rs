//! Exploration baselines: kNN novelty over a behavior archive (for the
//! novelty-search ES) and a grid-archive MAP-Elites with Gaussian genome
//! mutation. Both share the environments and evaluation plumbing with the
//! curiosity-driven ES so comparisons vary only the exploration signal.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Low-dimensional summary of one episode (for mazes: final position and
/// velocity).
#[derive(Debug, Clone, PartialEq)]
pub struct Behavior(pub Vec<f64>);

impl Behavior {
    pub fn distance(&self, other: &Behavior) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Append-only behavior archive with kNN novelty scoring.
#[derive(Debug, Clone)]
pub struct NoveltyArchive {
    behaviors: Vec<Behavior>,
    k: usize,
}

impl NoveltyArchive {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("novelty kNN size must be >= 1".into()));
        }
        Ok(Self {
            behaviors: Vec::new(),
            k,
        })
    }

    pub fn len(&self) -> usize {
        self.behaviors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.behaviors.is_empty()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn push(&mut self, b: Behavior) {
        self.behaviors.push(b);
    }

    pub fn iter(&self) -> impl Iterator<Item = &Behavior> {
        self.behaviors.iter()
    }

    /// Mean Euclidean distance to the k nearest archive entries (all of them
    /// when the archive holds fewer than k). An empty archive scores `+inf`:
    /// maximally novel.
    pub fn novelty_score(&self, b: &Behavior) -> f64 {
        if self.behaviors.is_empty() {
            return f64::INFINITY;
        }
        let mut dists: Vec<f64> = self.behaviors.iter().map(|a| a.distance(b)).collect();
        let k = self.k.min(dists.len());
        if k < dists.len() {
            dists.select_nth_unstable_by(k - 1, f64::total_cmp);
            dists.truncate(k);
        }
        // Sum in sorted order so the result is independent of the selection
        // algorithm's internal permutation.
        dists.sort_by(f64::total_cmp);
        dists.iter().sum::<f64>() / k as f64
    }
}

#[derive(Debug, Clone)]
pub struct EliteCell {
    pub genome: Vec<f64>,
    pub fitness: f64,
    pub behavior: Behavior,
    /// Generation at which this elite was found (for exports).
    pub generation: usize,
}

/// MAP-Elites archive: one best-fitness elite per cell of a discretized
/// behavior grid. Elites are stored in insertion order so random selection is
/// deterministic under a seeded RNG.
#[derive(Debug, Clone)]
pub struct EliteGrid {
    resolution: usize,
    bounds: Vec<(f64, f64)>,
    index: HashMap<Vec<u16>, usize>,
    elites: Vec<EliteCell>,
}

impl EliteGrid {
    pub fn new(resolution: usize, bounds: Vec<(f64, f64)>) -> Result<Self> {
        if resolution == 0 || resolution > u16::MAX as usize {
            return Err(Error::InvalidParameter("grid resolution out of range".into()));
        }
        if bounds.is_empty() || bounds.iter().any(|(lo, hi)| !(lo < hi)) {
            return Err(Error::InvalidParameter("grid bounds must be non-empty, lo < hi".into()));
        }
        Ok(Self {
            resolution,
            bounds,
            index: HashMap::new(),
            elites: Vec::new(),
        })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.elites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elites.is_empty()
    }

    pub fn elites(&self) -> &[EliteCell] {
        &self.elites
    }

    pub fn total_cells(&self) -> f64 {
        (self.resolution as f64).powi(self.bounds.len() as i32)
    }

    /// Occupied fraction of the grid.
    pub fn coverage(&self) -> f64 {
        self.elites.len() as f64 / self.total_cells()
    }

    /// Discrete cell of a behavior; out-of-bounds coordinates clamp to the
    /// boundary cells.
    pub fn cell_of(&self, b: &Behavior) -> Result<Vec<u16>> {
        if b.0.len() != self.bounds.len() {
            return Err(Error::Dimension {
                context: "behavior dimension",
                expected: self.bounds.len(),
                actual: b.0.len(),
            });
        }
        Ok(b.0
            .iter()
            .zip(&self.bounds)
            .map(|(&v, &(lo, hi))| {
                let frac = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
                ((frac * self.resolution as f64) as usize).min(self.resolution - 1) as u16
            })
            .collect())
    }

    /// Inserts if the cell is empty or the fitness is strictly better
    /// (first-found wins ties). Returns true if stored.
    pub fn insert(
        &mut self,
        genome: Vec<f64>,
        behavior: Behavior,
        fitness: f64,
        generation: usize,
    ) -> Result<bool> {
        let key = self.cell_of(&behavior)?;
        match self.index.get(&key) {
            Some(&pos) => {
                if fitness > self.elites[pos].fitness {
                    self.elites[pos] = EliteCell {
                        genome,
                        fitness,
                        behavior,
                        generation,
                    };
                    Ok(true)
                } else {
                    Ok(false)
                }
            }
            None => {
                self.index.insert(key, self.elites.len());
                self.elites.push(EliteCell {
                    genome,
                    fitness,
                    behavior,
                    generation,
                });
                Ok(true)
            }
        }
    }

    /// CSV export: behavior coordinates, fitness, generation found.
    pub fn to_csv(&self) -> String {
        let dims = self.bounds.len();
        let mut out = String::new();
        for d in 0..dims {
            out.push_str(&format!("b{d},"));
        }
        out.push_str("fitness,generation\n");
        for cell in &self.elites {
            for v in &cell.behavior.0 {
                out.push_str(&format!("{v},"));
            }
            out.push_str(&format!("{},{}\n", cell.fitness, cell.generation));
        }
        out
    }
}

/// Seeds the grid with `count` random genomes drawn `N(0, sigma^2)` per gene.
/// The eval closure may attach a payload (e.g. the trajectory) which is
/// returned per evaluation in genome order.
pub fn map_elites_bootstrap<F, T>(
    grid: &mut EliteGrid,
    count: usize,
    genome_dim: usize,
    sigma: f64,
    rng: &mut ChaCha8Rng,
    eval: F,
) -> Result<Vec<(f64, T)>>
where
    F: Fn(&[f64]) -> Result<(f64, Behavior, T)> + Sync,
    T: Send,
{
    let genomes: Vec<Vec<f64>> = (0..count)
        .map(|_| {
            (0..genome_dim)
                .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    insert_evaluated(grid, genomes, 0, eval)
}

/// One MAP-Elites generation: pick `batch` elites uniformly, perturb each
/// genome with `N(0, sigma_m^2)` noise, evaluate, and insert the offspring.
pub fn map_elites_generation<F, T>(
    grid: &mut EliteGrid,
    batch: usize,
    sigma_m: f64,
    generation: usize,
    rng: &mut ChaCha8Rng,
    eval: F,
) -> Result<Vec<(f64, T)>>
where
    F: Fn(&[f64]) -> Result<(f64, Behavior, T)> + Sync,
    T: Send,
{
    if grid.is_empty() {
        return Err(Error::InvalidParameter(
            "map-elites generation needs a bootstrapped grid".into(),
        ));
    }
    let mut offspring = Vec::with_capacity(batch);
    for _ in 0..batch {
        let parent = &grid.elites[rng.gen_range(0..grid.elites.len())];
        let child: Vec<f64> = parent
            .genome
            .iter()
            .map(|&g| g + sigma_m * rng.sample::<f64, _>(StandardNormal))
            .collect();
        offspring.push(child);
    }
    insert_evaluated(grid, offspring, generation, eval)
}

/// Evaluates genomes in parallel (results collected in order) and inserts
/// them serially.
fn insert_evaluated<F, T>(
    grid: &mut EliteGrid,
    genomes: Vec<Vec<f64>>,
    generation: usize,
    eval: F,
) -> Result<Vec<(f64, T)>>
where
    F: Fn(&[f64]) -> Result<(f64, Behavior, T)> + Sync,
    T: Send,
{
    let results: Vec<Result<(f64, Behavior, T)>> = genomes.par_iter().map(|g| eval(g)).collect();
    let mut out = Vec::with_capacity(genomes.len());
    for (genome, result) in genomes.into_iter().zip(results) {
        let (fitness, behavior, payload) = result?;
        grid.insert(genome, behavior, fitness, generation)?;
        out.push((fitness, payload));
    }
    Ok(out)
}
