//! Batch experiment runner: the per-generation loop, seeded execution,
//! checkpointing, and artifact emission.
//!
//! One generation is a parallel map (rollout plus read-only intrinsic
//! scoring) followed by a serial reduce (blending, ranking, center update,
//! buffer append, ICM training). Results are collected in individual order,
//! so a run is a pure function of its config and seed; the per-generation
//! wall-clock time is logged but kept out of the CSV artifacts.
//!
//! The three ES variants (curiosity, novelty, plain) run through a single
//! code path and differ only in the intrinsic-fitness provider. They also
//! consume dedicated RNG streams per concern, so e.g. a curiosity run with
//! `phi = 1` traces exactly the same centers as a plain-ES run of the same
//! seed.

use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    map_elites_bootstrap, map_elites_generation, Behavior, EliteGrid, NoveltyArchive,
};
use crate::config::{Algorithm, FingerprintMode, RunConfig};
use crate::error::{Error, Result};
use crate::es::{rank_indices, stream, stream_rng, EsCheckpoint, EsState, RankWeights};
use crate::fitness::{combine_fitness, curiosity_fitness};
use crate::icm::Icm;
use crate::maze::{rollout, MazeSpec, Trajectory, ACTION_DIM, STATE_DIM, V_MAX};
use crate::metrics::{best_reward_curve, pca_top2, CoverageGrid, PolicyFingerprint};
use crate::nn::{Activation, LayerSpec, Network};
use crate::replay::ReplayBuffer;
use crate::svg;

/// Hidden width of the policy network.
pub const POLICY_HIDDEN: usize = 64;

/// Per-generation statistics.
#[derive(Debug, Clone)]
pub struct GenerationReport {
    pub generation: usize,
    pub max_fe: f64,
    pub mean_fe: f64,
    pub min_fe: f64,
    pub max_fi: f64,
    pub mean_fi: f64,
    pub best_so_far: f64,
    pub coverage_percent: f64,
    pub buffer_size: usize,
    pub icm_mean_loss: f64,
    /// Cumulative rollout count.
    pub evaluations: usize,
    /// Logged, never written to CSV (outputs stay byte-reproducible).
    pub wall_ms: u128,
}

/// Outcome of a full run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub reports: Vec<GenerationReport>,
    pub best_reward: f64,
    pub final_coverage_percent: f64,
    pub total_evaluations: usize,
    /// Generations where a zero-reward individual outranked a rewarding one
    /// despite `phi > 0.5` (flagged, not fatal).
    pub dominance_violations: usize,
    pub out_dir: PathBuf,
    pub final_center: Option<Vec<f64>>,
}

/// Policy architecture shared by every algorithm.
pub fn policy_layers() -> Vec<LayerSpec> {
    Network::mlp(
        &[STATE_DIM, POLICY_HIDDEN, POLICY_HIDDEN, ACTION_DIM],
        Activation::Tanh,
        Activation::Linear,
    )
    .expect("static policy stack")
}

/// Resolves the maze and applies the horizon override.
pub fn resolve_maze(config: &RunConfig) -> Result<MazeSpec> {
    let mut maze = match config.env.as_str() {
        "snake" | "us" | "hard" => MazeSpec::builtin(&config.env)?,
        path => MazeSpec::load(Path::new(path))?,
    };
    if let Some(h) = config.horizon {
        maze.horizon = h;
    }
    Ok(maze)
}

/// Sizes the global thread pool from `CES_THREADS` (first call wins; later
/// calls and unset are no-ops).
pub fn init_thread_pool_from_env() {
    if let Ok(v) = std::env::var("CES_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

/// The pluggable intrinsic-fitness channel.
enum Intrinsic {
    /// Plain ES: the intrinsic channel is identically zero.
    None,
    Curiosity {
        icm: Icm,
        buffer: ReplayBuffer,
        buffer_rng: ChaCha8Rng,
        icm_rng: ChaCha8Rng,
    },
    Novelty {
        archive: NoveltyArchive,
    },
}

struct EvalOutcome {
    extrinsic: f64,
    curiosity: f64,
    trajectory: Trajectory,
}

/// Driver for the three ES variants.
pub struct EsDriver {
    config: RunConfig,
    maze: MazeSpec,
    layers: Vec<LayerSpec>,
    es: EsState,
    weights: RankWeights,
    intrinsic: Intrinsic,
    fitness_rng: ChaCha8Rng,
    coverage: CoverageGrid,
    best_so_far: f64,
    evaluations: usize,
    dominance_violations: usize,
    reports: Vec<GenerationReport>,
    fingerprints: Vec<PolicyFingerprint>,
    fitness_csv: String,
    final_states_csv: String,
    /// Test hook: keep the last generation's trajectories and genomes.
    pub record_last_generation: bool,
    pub last_trajectories: Vec<Trajectory>,
    pub last_genomes: Vec<Vec<f64>>,
}

impl EsDriver {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        if config.algorithm == Algorithm::MapElites {
            return Err(Error::InvalidConfig(
                "map_elites runs through MapElitesDriver".into(),
            ));
        }
        let maze = resolve_maze(&config)?;
        let layers = policy_layers();
        let seed = config.seed;

        let init_seed = stream_rng(seed, stream::INIT).gen::<u64>();
        let policy = Network::uniform_init(layers.clone(), init_seed)?;
        let es = EsState::new(
            policy.weights().to_vec(),
            config.sigma,
            config.lambda,
            config.mu,
            config.alpha,
            config.seed,
        )?;
        let weights = RankWeights::new(config.mu)?;

        let intrinsic = match config.algorithm {
            Algorithm::PlainEs => Intrinsic::None,
            Algorithm::NsEs => Intrinsic::Novelty {
                archive: NoveltyArchive::new(config.knn)?,
            },
            Algorithm::CuriosityEs => {
                let mut icm_rng = stream_rng(config.seed, stream::ICM);
                let icm_seed = icm_rng.gen::<u64>();
                Intrinsic::Curiosity {
                    icm: Icm::for_dims(
                        STATE_DIM,
                        ACTION_DIM,
                        config.beta,
                        config.eta,
                        config.alpha_icm,
                        icm_seed,
                    )?,
                    buffer: ReplayBuffer::new(config.capacity, config.m_per_individual)?,
                    buffer_rng: stream_rng(config.seed, stream::BUFFER),
                    icm_rng,
                }
            }
            Algorithm::MapElites => unreachable!(),
        };

        let coverage = CoverageGrid::new(
            50,
            (maze.bounds.min.x, maze.bounds.max.x),
            (maze.bounds.min.y, maze.bounds.max.y),
        )?;

        Ok(Self {
            config,
            maze,
            layers,
            es,
            weights,
            intrinsic,
            fitness_rng: stream_rng(seed, stream::FITNESS),
            coverage,
            best_so_far: 0.0,
            evaluations: 0,
            dominance_violations: 0,
            reports: Vec::new(),
            fingerprints: Vec::new(),
            fitness_csv: String::from("generation,index,f_e,f_i,total,rank\n"),
            final_states_csv: String::from("x,y,generation\n"),
            record_last_generation: false,
            last_trajectories: Vec::new(),
            last_genomes: Vec::new(),
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn maze(&self) -> &MazeSpec {
        &self.maze
    }

    pub fn center(&self) -> &[f64] {
        self.es.center()
    }

    pub fn generation(&self) -> usize {
        self.es.generation
    }

    pub fn icm(&self) -> Option<&Icm> {
        match &self.intrinsic {
            Intrinsic::Curiosity { icm, .. } => Some(icm),
            _ => None,
        }
    }

    pub fn archive_len(&self) -> usize {
        match &self.intrinsic {
            Intrinsic::Novelty { archive } => archive.len(),
            _ => 0,
        }
    }

    pub fn buffer_len(&self) -> usize {
        match &self.intrinsic {
            Intrinsic::Curiosity { buffer, .. } => buffer.len(),
            _ => 0,
        }
    }

    pub fn reports(&self) -> &[GenerationReport] {
        &self.reports
    }

    /// Runs one full generation and returns its report.
    pub fn step(&mut self) -> Result<GenerationReport> {
        let started = Instant::now();
        let generation = self.es.generation;
        let population = self.es.sample_population();
        let t_sample = started.elapsed().as_millis();

        // Parallel evaluation; results collected in individual order. The ICM
        // is read-only here: fitness in generation k uses the weights
        // produced at the end of generation k-1.
        let icm_ref = match &self.intrinsic {
            Intrinsic::Curiosity { icm, .. } => Some(icm),
            _ => None,
        };
        let gamma = self.config.gamma;
        let maze = &self.maze;
        let layers = &self.layers;
        let outcomes: Vec<Result<EvalOutcome>> = population
            .par_iter()
            .map(|genome| {
                let policy = Network::from_flat(layers.clone(), genome.clone())?;
                let (trajectory, extrinsic) = rollout(maze, &policy)?;
                let curiosity = match icm_ref {
                    Some(icm) => curiosity_fitness(icm, &trajectory, gamma)?,
                    None => 0.0,
                };
                Ok(EvalOutcome {
                    extrinsic,
                    curiosity,
                    trajectory,
                })
            })
            .collect();
        let outcomes: Vec<EvalOutcome> = outcomes.into_iter().collect::<Result<_>>()?;
        let t_eval = started.elapsed().as_millis();
        self.evaluations += outcomes.len();

        // Intrinsic channel.
        let intrinsic_values: Vec<f64> = match &self.intrinsic {
            Intrinsic::None => vec![0.0; outcomes.len()],
            Intrinsic::Curiosity { .. } => outcomes.iter().map(|o| o.curiosity).collect(),
            Intrinsic::Novelty { archive } => outcomes
                .iter()
                .map(|o| archive.novelty_score(&behavior_of(&o.trajectory)))
                .collect(),
        };
        for o in &outcomes {
            if !o.extrinsic.is_finite() {
                return Err(Error::NonFinite("extrinsic fitness"));
            }
        }
        if matches!(self.intrinsic, Intrinsic::Curiosity { .. })
            && intrinsic_values.iter().any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite("curiosity fitness"));
        }

        let records: Vec<(f64, f64)> = outcomes
            .iter()
            .zip(&intrinsic_values)
            .map(|(o, &fi)| (o.extrinsic, fi))
            .collect();
        let totals = combine_fitness(&records, self.config.phi, &mut self.fitness_rng)?;

        // Ranking; ties resolved by lower index.
        let order = rank_indices(&totals);

        // Rewarding-policy dominance check (flagged, not enforced).
        if self.config.phi > 0.5 {
            let any_pos = records.iter().any(|r| r.0 > 0.0);
            let any_zero = records.iter().any(|r| r.0 == 0.0);
            if any_pos && any_zero {
                let worst_pos_rank = order
                    .iter()
                    .enumerate()
                    .filter(|(_, &i)| records[i].0 > 0.0)
                    .map(|(rank, _)| rank)
                    .max()
                    .unwrap();
                let best_zero_rank = order
                    .iter()
                    .enumerate()
                    .filter(|(_, &i)| records[i].0 == 0.0)
                    .map(|(rank, _)| rank)
                    .min()
                    .unwrap();
                if best_zero_rank < worst_pos_rank {
                    self.dominance_violations += 1;
                    log::warn!(
                        "generation {generation}: zero-reward individual ranked above a rewarding one"
                    );
                }
            }
        }

        // Serial reductions in individual order.
        for (i, o) in outcomes.iter().enumerate() {
            let pos = o.trajectory.final_position();
            self.coverage.update(pos.x, pos.y);
            self.final_states_csv
                .push_str(&format!("{},{},{}\n", pos.x, pos.y, generation));
            let rank = order.iter().position(|&j| j == i).unwrap();
            self.fitness_csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                generation, i, o.extrinsic, intrinsic_values[i], totals[i], rank
            ));
        }
        self.record_fingerprints(&outcomes, generation);

        match &mut self.intrinsic {
            Intrinsic::Curiosity {
                buffer, buffer_rng, ..
            } => {
                for o in &outcomes {
                    buffer.add_from_trajectory(&o.trajectory, buffer_rng);
                }
            }
            Intrinsic::Novelty { archive } => {
                for o in &outcomes {
                    archive.push(behavior_of(&o.trajectory));
                }
            }
            Intrinsic::None => {}
        }

        // ES update from the mu best.
        let elites: Vec<&[f64]> = order[..self.config.mu]
            .iter()
            .map(|&i| population[i].as_slice())
            .collect();
        let gradient = self.es.estimate_gradient(&elites, &self.weights)?;
        self.es.update_center(&gradient)?;

        // ICM training happens strictly after every evaluation of this
        // generation (single-writer phase).
        let icm_mean_loss = match &mut self.intrinsic {
            Intrinsic::Curiosity {
                icm,
                buffer,
                icm_rng,
                ..
            } => {
                let history = icm.train(
                    buffer,
                    self.config.icm_epochs,
                    self.config.batch_size,
                    icm_rng,
                )?;
                if history.is_empty() {
                    0.0
                } else {
                    history.iter().sum::<f64>() / history.len() as f64
                }
            }
            _ => 0.0,
        };

        eprintln!(
            "TIMING gen {generation}: sample {t_sample} eval {} train {} (cumulative ms)",
            t_eval - t_sample,
            started.elapsed().as_millis() - t_eval
        );
        let fe: Vec<f64> = records.iter().map(|r| r.0).collect();
        let max_fe = fe.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        self.best_so_far = self.best_so_far.max(max_fe);
        let report = GenerationReport {
            generation,
            max_fe,
            mean_fe: fe.iter().sum::<f64>() / fe.len() as f64,
            min_fe: fe.iter().copied().fold(f64::INFINITY, f64::min),
            max_fi: intrinsic_values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean_fi: intrinsic_values.iter().sum::<f64>() / intrinsic_values.len() as f64,
            best_so_far: self.best_so_far,
            coverage_percent: self.coverage.percent(),
            buffer_size: self.buffer_len(),
            icm_mean_loss,
            evaluations: self.evaluations,
            wall_ms: started.elapsed().as_millis(),
        };
        log::info!(
            "gen {generation}: best {:.4} (so far {:.4}) coverage {:.2}% buffer {} loss {:.4} [{} ms]",
            report.max_fe,
            report.best_so_far,
            report.coverage_percent,
            report.buffer_size,
            report.icm_mean_loss,
            report.wall_ms
        );
        self.reports.push(report.clone());

        if self.record_last_generation {
            self.last_trajectories = outcomes.into_iter().map(|o| o.trajectory).collect();
            self.last_genomes = population;
        }

        Ok(report)
    }

    fn record_fingerprints(&mut self, outcomes: &[EvalOutcome], generation: usize) {
        let algorithm = self.config.algorithm.name();
        match self.config.fingerprint_mode {
            FingerprintMode::None => {}
            FingerprintMode::All => {
                for o in outcomes.iter().filter(|o| o.extrinsic > 0.0) {
                    self.fingerprints.push(PolicyFingerprint::from_trajectory(
                        &o.trajectory,
                        o.extrinsic,
                        algorithm,
                        generation,
                    ));
                }
            }
            FingerprintMode::Best => {
                let best = outcomes
                    .iter()
                    .enumerate()
                    .filter(|(_, o)| o.extrinsic > 0.0)
                    .max_by(|(ia, a), (ib, b)| {
                        a.extrinsic
                            .total_cmp(&b.extrinsic)
                            .then(ib.cmp(ia)) // ties: lower index
                    });
                if let Some((_, o)) = best {
                    self.fingerprints.push(PolicyFingerprint::from_trajectory(
                        &o.trajectory,
                        o.extrinsic,
                        algorithm,
                        generation,
                    ));
                }
            }
        }
    }

    fn write_checkpoint(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let tag = format!("gen_{:05}", self.es.generation);
        let manifest = EsRunCheckpoint {
            algorithm: self.config.algorithm.name().to_string(),
            maze_text: self.maze.to_text(),
            maze_name: self.maze.name.clone(),
            layers: self.layers.clone(),
            es: self.es.to_checkpoint(),
            seed: self.config.seed,
        };
        std::fs::write(
            dir.join(format!("{tag}.json")),
            serde_json::to_string(&manifest)?,
        )?;
        if let Intrinsic::Curiosity { icm, .. } = &self.intrinsic {
            icm.save_checkpoint(&dir.join(format!("{tag}.icm")))?;
        }
        Ok(())
    }

    /// Runs all generations and writes the artifact files.
    pub fn run_to_completion(&mut self) -> Result<RunSummary> {
        let out = self.config.out_dir.clone();
        std::fs::create_dir_all(&out)?;
        std::fs::write(out.join("config.resolved.txt"), self.config.to_text())?;
        std::fs::write(out.join("maze.txt"), self.maze.to_text())?;

        let checkpoints = out.join("checkpoints");
        for _ in 0..self.config.generations {
            self.step()?;
            if self.es.generation % self.config.checkpoint_every == 0 {
                self.write_checkpoint(&checkpoints)?;
            }
        }
        self.write_checkpoint(&checkpoints)?;

        write_reports_csv(&out, &self.reports)?;
        std::fs::write(out.join("fitness.csv"), &self.fitness_csv)?;
        std::fs::write(out.join("final_states.csv"), &self.final_states_csv)?;
        if self.config.fingerprint_mode != FingerprintMode::None {
            write_fingerprints(
                &out.join("fingerprints.bin"),
                self.config.algorithm.name(),
                STATE_DIM,
                &self.fingerprints,
            )?;
        }
        if self.config.dump_buffer {
            if let Intrinsic::Curiosity { buffer, .. } = &self.intrinsic {
                buffer.dump_binary(&out.join("buffer.bin"))?;
            }
        }

        let expected = self.config.lambda * self.config.generations;
        debug_assert_eq!(self.evaluations, expected, "rollout accounting");

        Ok(RunSummary {
            reports: self.reports.clone(),
            best_reward: self.best_so_far,
            final_coverage_percent: self.coverage.percent(),
            total_evaluations: self.evaluations,
            dominance_violations: self.dominance_violations,
            out_dir: out,
            final_center: Some(self.es.center().to_vec()),
        })
    }
}

/// Behavior descriptor for maze tasks: final position and velocity.
pub fn behavior_of(trajectory: &Trajectory) -> Behavior {
    let s = trajectory.final_state();
    Behavior(vec![s[0], s[1], s[2], s[3]])
}

/// MAP-Elites driver sharing the evaluation plumbing and artifact formats.
pub struct MapElitesDriver {
    config: RunConfig,
    maze: MazeSpec,
    layers: Vec<LayerSpec>,
    grid: EliteGrid,
    rng: ChaCha8Rng,
    coverage: CoverageGrid,
    best_so_far: f64,
    evaluations: usize,
    reports: Vec<GenerationReport>,
    fitness_csv: String,
    final_states_csv: String,
    fingerprints: Vec<PolicyFingerprint>,
}

impl MapElitesDriver {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let maze = resolve_maze(&config)?;
        let layers = policy_layers();
        let bounds = vec![
            (maze.bounds.min.x, maze.bounds.max.x),
            (maze.bounds.min.y, maze.bounds.max.y),
            (-V_MAX, V_MAX),
            (-V_MAX, V_MAX),
        ];
        let grid = EliteGrid::new(50, bounds)?;
        let coverage = CoverageGrid::new(
            50,
            (maze.bounds.min.x, maze.bounds.max.x),
            (maze.bounds.min.y, maze.bounds.max.y),
        )?;
        Ok(Self {
            rng: stream_rng(config.seed, stream::MAP_ELITES),
            config,
            maze,
            layers,
            grid,
            coverage,
            best_so_far: 0.0,
            evaluations: 0,
            reports: Vec::new(),
            fitness_csv: String::from("generation,index,f_e,f_i,total,rank\n"),
            final_states_csv: String::from("x,y,generation\n"),
            fingerprints: Vec::new(),
        })
    }

    pub fn grid(&self) -> &EliteGrid {
        &self.grid
    }

    pub fn run_to_completion(&mut self) -> Result<RunSummary> {
        let out = self.config.out_dir.clone();
        std::fs::create_dir_all(&out)?;
        std::fs::write(out.join("config.resolved.txt"), self.config.to_text())?;
        std::fs::write(out.join("maze.txt"), self.maze.to_text())?;

        let maze = self.maze.clone();
        let layers = self.layers.clone();
        let genome_dim = crate::nn::param_count(&layers);
        let eval = |genome: &[f64]| -> Result<(f64, Behavior, Trajectory)> {
            let policy = Network::from_flat(layers.clone(), genome.to_vec())?;
            let (trajectory, fitness) = rollout(&maze, &policy)?;
            let behavior = behavior_of(&trajectory);
            Ok((fitness, behavior, trajectory))
        };

        // Bootstrap with random genomes, then mutate stored elites.
        let batch = map_elites_bootstrap(
            &mut self.grid,
            self.config.me_bootstrap,
            genome_dim,
            self.config.sigma,
            &mut self.rng,
            eval,
        )?;
        self.evaluations += batch.len();
        self.absorb_batch(0, &batch);

        for generation in 1..=self.config.generations {
            let batch = map_elites_generation(
                &mut self.grid,
                self.config.me_batch,
                self.config.sigma_mutation,
                generation,
                &mut self.rng,
                eval,
            )?;
            self.evaluations += batch.len();
            self.absorb_batch(generation, &batch);

            if generation % self.config.checkpoint_every == 0 || generation == self.config.generations {
                let dir = out.join("checkpoints");
                std::fs::create_dir_all(&dir)?;
                std::fs::write(
                    dir.join(format!("gen_{generation:05}.grid.csv")),
                    self.grid.to_csv(),
                )?;
            }
        }

        write_reports_csv(&out, &self.reports)?;
        std::fs::write(out.join("fitness.csv"), &self.fitness_csv)?;
        std::fs::write(out.join("final_states.csv"), &self.final_states_csv)?;
        std::fs::write(out.join("grid.csv"), self.grid.to_csv())?;
        if self.config.fingerprint_mode != FingerprintMode::None {
            write_fingerprints(
                &out.join("fingerprints.bin"),
                self.config.algorithm.name(),
                STATE_DIM,
                &self.fingerprints,
            )?;
        }

        Ok(RunSummary {
            reports: self.reports.clone(),
            best_reward: self.best_so_far,
            final_coverage_percent: self.coverage.percent(),
            total_evaluations: self.evaluations,
            dominance_violations: 0,
            out_dir: out,
            final_center: None,
        })
    }

    fn absorb_batch(&mut self, generation: usize, outcomes: &[(f64, Trajectory)]) {
        let started = Instant::now();
        let fe: Vec<f64> = outcomes.iter().map(|(f, _)| *f).collect();
        let order = rank_indices(&fe);
        for (i, (fitness, trajectory)) in outcomes.iter().enumerate() {
            let pos = trajectory.final_position();
            self.coverage.update(pos.x, pos.y);
            self.final_states_csv
                .push_str(&format!("{},{},{}\n", pos.x, pos.y, generation));
            let rank = order.iter().position(|&j| j == i).unwrap();
            self.fitness_csv.push_str(&format!(
                "{generation},{i},{fitness},0,{fitness},{rank}\n"
            ));
        }
        if self.config.fingerprint_mode != FingerprintMode::None {
            let best = outcomes
                .iter()
                .filter(|(f, _)| *f > 0.0)
                .max_by(|a, b| a.0.total_cmp(&b.0));
            match (self.config.fingerprint_mode, best) {
                (FingerprintMode::Best, Some((f, t))) => {
                    self.fingerprints.push(PolicyFingerprint::from_trajectory(
                        t,
                        *f,
                        self.config.algorithm.name(),
                        generation,
                    ));
                }
                (FingerprintMode::All, _) => {
                    for (f, t) in outcomes.iter().filter(|(f, _)| *f > 0.0) {
                        self.fingerprints.push(PolicyFingerprint::from_trajectory(
                            t,
                            *f,
                            self.config.algorithm.name(),
                            generation,
                        ));
                    }
                }
                _ => {}
            }
        }
        let max_fe = fe.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        self.best_so_far = self.best_so_far.max(max_fe);
        let report = GenerationReport {
            generation,
            max_fe,
            mean_fe: fe.iter().sum::<f64>() / fe.len().max(1) as f64,
            min_fe: fe.iter().copied().fold(f64::INFINITY, f64::min),
            max_fi: 0.0,
            mean_fi: 0.0,
            best_so_far: self.best_so_far,
            coverage_percent: self.coverage.percent(),
            buffer_size: 0,
            icm_mean_loss: 0.0,
            evaluations: self.evaluations,
            wall_ms: started.elapsed().as_millis(),
        };
        log::info!(
            "me gen {generation}: best {:.4} (so far {:.4}) coverage {:.2}% archive {}",
            report.max_fe,
            report.best_so_far,
            report.coverage_percent,
            self.grid.len()
        );
        self.reports.push(report);
    }
}

/// Runs the configured algorithm to completion, writing artifacts under the
/// config's output directory.
pub fn run(config: &RunConfig) -> Result<RunSummary> {
    match config.algorithm {
        Algorithm::MapElites => MapElitesDriver::new(config.clone())?.run_to_completion(),
        _ => EsDriver::new(config.clone())?.run_to_completion(),
    }
}

#[derive(Serialize, Deserialize)]
struct EsRunCheckpoint {
    algorithm: String,
    maze_name: String,
    maze_text: String,
    layers: Vec<LayerSpec>,
    es: EsCheckpoint,
    seed: u64,
}

fn write_reports_csv(out: &Path, reports: &[GenerationReport]) -> Result<()> {
    let mut s = String::from(
        "generation,max_fe,mean_fe,min_fe,max_fi,mean_fi,best_so_far,coverage_percent,buffer_size,icm_mean_loss,evaluations\n",
    );
    for r in reports {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.generation,
            r.max_fe,
            r.mean_fe,
            r.min_fe,
            r.max_fi,
            r.mean_fi,
            r.best_so_far,
            r.coverage_percent,
            r.buffer_size,
            r.icm_mean_loss,
            r.evaluations
        ));
    }
    std::fs::write(out.join("reports.csv"), s)?;
    Ok(())
}

const FINGERPRINT_MAGIC: &[u8] = b"CESFP1\n";

fn write_fingerprints(
    path: &Path,
    algorithm: &str,
    state_dim: usize,
    fingerprints: &[PolicyFingerprint],
) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    w.write_all(FINGERPRINT_MAGIC)?;
    let header = serde_json::json!({ "algorithm": algorithm, "state_dim": state_dim });
    w.write_all(serde_json::to_string(&header)?.as_bytes())?;
    w.write_all(b"\n")?;
    for fp in fingerprints {
        w.write_all(&(fp.generation as u32).to_le_bytes())?;
        w.write_all(&fp.fitness.to_le_bytes())?;
        w.write_all(&(fp.data.len() as u32).to_le_bytes())?;
        for &v in &fp.data {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// (algorithm, fingerprints) from a fingerprint file.
pub fn read_fingerprints(path: &Path) -> Result<(String, Vec<PolicyFingerprint>)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if !bytes.starts_with(FINGERPRINT_MAGIC) {
        return Err(Error::Checkpoint("bad fingerprint file magic".into()));
    }
    let rest = &bytes[FINGERPRINT_MAGIC.len()..];
    let newline = rest
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Checkpoint("missing fingerprint header".into()))?;
    let header: serde_json::Value = serde_json::from_slice(&rest[..newline])?;
    let algorithm = header["algorithm"].as_str().unwrap_or("unknown").to_string();
    let mut fps = Vec::new();
    let mut cur = &rest[newline + 1..];
    while !cur.is_empty() {
        if cur.len() < 16 {
            return Err(Error::Checkpoint("truncated fingerprint record".into()));
        }
        let generation = u32::from_le_bytes(cur[0..4].try_into().unwrap()) as usize;
        let fitness = f64::from_le_bytes(cur[4..12].try_into().unwrap());
        let count = u32::from_le_bytes(cur[12..16].try_into().unwrap()) as usize;
        cur = &cur[16..];
        if cur.len() < 4 * count {
            return Err(Error::Checkpoint("truncated fingerprint data".into()));
        }
        let mut data = Vec::with_capacity(count);
        for i in 0..count {
            data.push(f32::from_le_bytes(cur[4 * i..4 * i + 4].try_into().unwrap()) as f64);
        }
        cur = &cur[4 * count..];
        fps.push(PolicyFingerprint {
            data,
            fitness,
            algorithm: algorithm.clone(),
            generation,
        });
    }
    Ok((algorithm, fps))
}

/// Re-rolls a stored checkpoint: episode 0 is the center policy, further
/// episodes sample around it with the checkpointed sigma. Trajectory CSVs are
/// written to `out`.
pub fn replay_checkpoint(checkpoint: &Path, episodes: usize, out: &Path) -> Result<()> {
    let manifest: EsRunCheckpoint =
        serde_json::from_str(&std::fs::read_to_string(checkpoint)?)?;
    let maze = crate::maze::parse_maze(&manifest.maze_text)?;
    let es = EsState::from_checkpoint(manifest.es)?;
    std::fs::create_dir_all(out)?;

    let mut rng = stream_rng(manifest.seed, stream::INIT);
    for episode in 0..episodes.max(1) {
        let genome: Vec<f64> = if episode == 0 {
            es.center().to_vec()
        } else {
            es.center()
                .iter()
                .map(|&c| c + es.sigma * rng.sample::<f64, _>(StandardNormal))
                .collect()
        };
        let policy = Network::from_flat(manifest.layers.clone(), genome)?;
        let (trajectory, fitness) = rollout(&maze, &policy)?;
        std::fs::write(
            out.join(format!("trajectory_ep{episode:03}.csv")),
            trajectory.to_csv(),
        )?;
        log::info!("episode {episode}: reward {fitness:.4}, {} steps", trajectory.len());
    }
    Ok(())
}

/// Post-processes a run directory: reward curve, coverage curve, final-state
/// scatter, and the PCA projection of recorded rewarding-policy fingerprints.
/// CSVs and SVGs land in `<run>/analysis/`.
pub fn analyze_run(run_dir: &Path) -> Result<()> {
    let analysis = run_dir.join("analysis");
    std::fs::create_dir_all(&analysis)?;

    let reports = std::fs::read_to_string(run_dir.join("reports.csv"))?;
    let mut generations = Vec::new();
    let mut max_fe = Vec::new();
    let mut coverage = Vec::new();
    for line in reports.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() < 11 {
            continue;
        }
        generations.push(cols[0].parse::<f64>().unwrap_or(0.0));
        max_fe.push(cols[1].parse::<f64>().unwrap_or(0.0));
        coverage.push(cols[7].parse::<f64>().unwrap_or(0.0));
    }

    let curve = best_reward_curve(&max_fe);
    let mut reward_csv = String::from("generation,best_so_far\n");
    for (g, b) in generations.iter().zip(&curve) {
        reward_csv.push_str(&format!("{g},{b}\n"));
    }
    std::fs::write(analysis.join("reward_curve.csv"), &reward_csv)?;
    let reward_points: Vec<(f64, f64)> = generations.iter().copied().zip(curve.iter().copied()).collect();
    std::fs::write(
        analysis.join("reward_curve.svg"),
        svg::line_chart("best reward since start", "generation", "reward", &[("best", reward_points)]),
    )?;

    let mut coverage_csv = String::from("generation,coverage_percent\n");
    for (g, c) in generations.iter().zip(&coverage) {
        coverage_csv.push_str(&format!("{g},{c}\n"));
    }
    std::fs::write(analysis.join("coverage.csv"), &coverage_csv)?;
    let coverage_points: Vec<(f64, f64)> =
        generations.iter().copied().zip(coverage.iter().copied()).collect();
    std::fs::write(
        analysis.join("coverage.svg"),
        svg::line_chart("final-position coverage", "generation", "percent", &[("coverage", coverage_points)]),
    )?;

    // Final-state scatter over the maze layout.
    let maze = crate::maze::parse_maze(&std::fs::read_to_string(run_dir.join("maze.txt"))?)?;
    let final_states = std::fs::read_to_string(run_dir.join("final_states.csv"))?;
    let points: Vec<(f64, f64, Option<f64>)> = final_states
        .lines()
        .skip(1)
        .filter_map(|line| {
            let cols: Vec<&str> = line.split(',').collect();
            Some((
                cols.first()?.parse().ok()?,
                cols.get(1)?.parse().ok()?,
                cols.get(2)?.parse().ok(),
            ))
        })
        .collect();
    std::fs::write(
        analysis.join("final_states.svg"),
        svg::maze_scatter("final states (colored by generation)", &maze, &points),
    )?;

    // PCA over rewarding-policy fingerprints, when recorded and plentiful.
    let fp_path = run_dir.join("fingerprints.bin");
    if fp_path.exists() {
        let (algorithm, fps) = read_fingerprints(&fp_path)?;
        if fps.len() >= 3 {
            let d = fps[0].data.len();
            let rows = ndarray::Array2::from_shape_fn((fps.len(), d), |(i, j)| fps[i].data[j]);
            let pca = pca_top2(&rows)?;
            let mut pca_csv = String::from("p1,p2,fitness,algorithm\n");
            for (fp, &(p1, p2)) in fps.iter().zip(&pca.projections) {
                pca_csv.push_str(&format!("{p1},{p2},{},{algorithm}\n", fp.fitness));
            }
            std::fs::write(analysis.join("pca.csv"), &pca_csv)?;
            let pca_points: Vec<(f64, f64, Option<f64>)> = fps
                .iter()
                .zip(&pca.projections)
                .map(|(fp, &(p1, p2))| (p1, p2, Some(fp.fitness)))
                .collect();
            std::fs::write(
                analysis.join("pca.svg"),
                svg::scatter(
                    "rewarding policies, trailing-state PCA (colored by reward)",
                    "pc1",
                    "pc2",
                    &pca_points,
                ),
            )?;
        } else {
            log::info!("analysis: fewer than 3 fingerprints, skipping PCA");
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config(algorithm: Algorithm, dir: &Path) -> RunConfig {
        let mut c = RunConfig::defaults_for_env("snake");
        c.algorithm = algorithm;
        c.lambda = 4;
        c.mu = 2;
        c.generations = 2;
        c.horizon = Some(40);
        c.m_per_individual = 5;
        c.capacity = 100;
        c.icm_epochs = 2;
        c.batch_size = 8;
        c.me_bootstrap = 6;
        c.me_batch = 4;
        c.checkpoint_every = 1;
        c.out_dir = dir.to_path_buf();
        c
    }

    #[test]
    fn loop_accounting_matches_the_configured_shape() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = tiny_config(Algorithm::CuriosityEs, dir.path());
        config.generations = 1;
        let mut driver = EsDriver::new(config).unwrap();
        let report = driver.step().unwrap();
        assert_eq!(report.evaluations, 4);
        // Buffer holds min(m, T) per individual.
        assert_eq!(driver.buffer_len(), 4 * 5);
        // ICM trained once for the configured number of epochs: the loss is a
        // finite mean over 2 epochs.
        assert!(report.icm_mean_loss.is_finite() && report.icm_mean_loss > 0.0);
    }

    #[test]
    fn novelty_archive_grows_by_lambda_per_generation() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny_config(Algorithm::NsEs, dir.path());
        let mut driver = EsDriver::new(config).unwrap();
        driver.step().unwrap();
        assert_eq!(driver.archive_len(), 4);
        driver.step().unwrap();
        assert_eq!(driver.archive_len(), 8);
    }

    #[test]
    fn runs_write_the_expected_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny_config(Algorithm::CuriosityEs, dir.path());
        let summary = run(&config).unwrap();
        assert_eq!(summary.total_evaluations, 8);
        for file in [
            "config.resolved.txt",
            "maze.txt",
            "reports.csv",
            "fitness.csv",
            "final_states.csv",
        ] {
            assert!(dir.path().join(file).exists(), "{file} missing");
        }
        assert!(dir.path().join("checkpoints/gen_00002.json").exists());
        assert!(dir.path().join("checkpoints/gen_00002.icm").exists());
        analyze_run(dir.path()).unwrap();
        assert!(dir.path().join("analysis/reward_curve.csv").exists());
        assert!(dir.path().join("analysis/coverage.svg").exists());
        assert!(dir.path().join("analysis/final_states.svg").exists());
    }

    #[test]
    fn map_elites_accounting_is_bootstrap_plus_batches() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny_config(Algorithm::MapElites, dir.path());
        let summary = run(&config).unwrap();
        assert_eq!(summary.total_evaluations, 6 + 2 * 4);
        assert!(dir.path().join("grid.csv").exists());
        // Coverage only grows.
        let coverages: Vec<f64> = summary.reports.iter().map(|r| r.coverage_percent).collect();
        assert!(coverages.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn replay_writes_trajectories_from_a_checkpoint() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny_config(Algorithm::PlainEs, dir.path());
        run(&config).unwrap();
        let replay_dir = dir.path().join("replays");
        replay_checkpoint(
            &dir.path().join("checkpoints/gen_00002.json"),
            2,
            &replay_dir,
        )
        .unwrap();
        assert!(replay_dir.join("trajectory_ep000.csv").exists());
        assert!(replay_dir.join("trajectory_ep001.csv").exists());
        let csv = std::fs::read_to_string(replay_dir.join("trajectory_ep000.csv")).unwrap();
        assert!(csv.starts_with("t,x,y,v_x,v_y,a_x,a_y,reward\n"));
    }

    #[test]
    fn fingerprint_files_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fp.bin");
        let fps = vec![
            PolicyFingerprint {
                data: vec![1.0, 2.0, 3.0],
                fitness: 0.5,
                algorithm: "demo".into(),
                generation: 3,
            },
            PolicyFingerprint {
                data: vec![-1.0, 0.25, 8.0],
                fitness: 0.75,
                algorithm: "demo".into(),
                generation: 9,
            },
        ];
        write_fingerprints(&path, "demo", 3, &fps).unwrap();
        let (algorithm, loaded) = read_fingerprints(&path).unwrap();
        assert_eq!(algorithm, "demo");
        assert_eq!(loaded.len(), 2);
        assert_eq!(loaded[0].generation, 3);
        assert_eq!(loaded[1].fitness, 0.75);
        assert_eq!(loaded[1].data, vec![-1.0, 0.25, 8.0]);
    }
}
