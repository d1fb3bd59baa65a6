//! Run configuration: per-maze defaults plus a flat key-value config file
//! format (`key value` lines, `#` comments).

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    CuriosityEs,
    NsEs,
    PlainEs,
    MapElites,
}

impl Algorithm {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "curiosity_es" => Ok(Self::CuriosityEs),
            "ns_es" => Ok(Self::NsEs),
            "plain_es" => Ok(Self::PlainEs),
            "map_elites" => Ok(Self::MapElites),
            other => Err(Error::InvalidConfig(format!(
                "unknown algorithm '{other}' (expected curiosity_es, ns_es, plain_es, map_elites)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::CuriosityEs => "curiosity_es",
            Self::NsEs => "ns_es",
            Self::PlainEs => "plain_es",
            Self::MapElites => "map_elites",
        }
    }
}

/// How many rewarding-policy fingerprints to record per generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FingerprintMode {
    /// The generation's best rewarding individual only (default; bounds file
    /// size at one fingerprint per generation).
    Best,
    /// Every rewarding individual.
    All,
    None,
}

impl FingerprintMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "best" => Ok(Self::Best),
            "all" => Ok(Self::All),
            "none" => Ok(Self::None),
            other => Err(Error::InvalidConfig(format!(
                "unknown fingerprint mode '{other}' (expected best, all, none)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Best => "best",
            Self::All => "all",
            Self::None => "none",
        }
    }
}

/// Full experiment configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    /// Builtin maze name (snake, us, hard) or a maze file path.
    pub env: String,
    pub sigma: f64,
    pub lambda: usize,
    pub mu: usize,
    pub alpha: f64,
    pub alpha_icm: f64,
    pub beta: f64,
    pub gamma: f64,
    /// ICM training epochs per generation.
    pub icm_epochs: usize,
    /// Transitions stored per individual.
    pub m_per_individual: usize,
    pub phi: f64,
    pub knn: usize,
    /// Replay buffer capacity.
    pub capacity: usize,
    pub batch_size: usize,
    pub eta: f64,
    /// Overrides the maze's episode horizon when set.
    pub horizon: Option<usize>,
    pub generations: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// MAP-Elites: random genomes evaluated before the main loop.
    pub me_bootstrap: usize,
    /// MAP-Elites: offspring per generation.
    pub me_batch: usize,
    /// MAP-Elites mutation standard deviation (defaults to sigma).
    pub sigma_mutation: f64,
    pub fingerprint_mode: FingerprintMode,
    pub checkpoint_every: usize,
    pub dump_buffer: bool,
}

impl RunConfig {
    /// Defaults for a named environment. The ES rows differ per maze; the
    /// curiosity and buffer settings are shared.
    pub fn defaults_for_env(env: &str) -> Self {
        let (alpha, beta, knn) = match env {
            "snake" => (0.5, 0.1, 20),
            "us" => (1.0, 0.2, 10),
            "hard" => (1.0, 0.2, 20),
            // Custom maze files fall back to the generic row.
            _ => (1.0, 0.2, 20),
        };
        Self {
            algorithm: Algorithm::CuriosityEs,
            env: env.to_string(),
            sigma: 0.5,
            lambda: 56,
            mu: 28,
            alpha,
            alpha_icm: 1e-4,
            beta,
            gamma: 0.99,
            icm_epochs: 64,
            m_per_individual: 50,
            phi: 0.8,
            knn,
            capacity: 200_000,
            batch_size: 128,
            eta: 1.0,
            horizon: None,
            generations: 300,
            seed: 0,
            out_dir: PathBuf::from("runs/out"),
            me_bootstrap: 500,
            me_batch: 56,
            sigma_mutation: 0.5,
            fingerprint_mode: FingerprintMode::Best,
            checkpoint_every: 25,
            dump_buffer: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.mu == 0 || self.lambda == 0 || self.mu > self.lambda {
            return bad(format!("need 1 <= mu <= lambda, got mu={} lambda={}", self.mu, self.lambda));
        }
        if self.sigma <= 0.0 || self.alpha <= 0.0 || self.alpha_icm < 0.0 {
            return bad("sigma and alpha must be positive, alpha_icm nonnegative".into());
        }
        for (name, v) in [("beta", self.beta), ("gamma", self.gamma), ("phi", self.phi)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must be in [0, 1], got {v}"));
            }
        }
        if self.eta <= 0.0 {
            return bad("eta must be positive".into());
        }
        if self.icm_epochs == 0
            || self.m_per_individual == 0
            || self.capacity == 0
            || self.batch_size == 0
            || self.knn == 0
        {
            return bad("icm_epochs, m, capacity, batch_size, knn must be >= 1".into());
        }
        if self.generations == 0 {
            return bad("generations must be >= 1".into());
        }
        if self.horizon == Some(0) {
            return bad("horizon must be >= 1".into());
        }
        if self.algorithm == Algorithm::MapElites && (self.me_bootstrap == 0 || self.me_batch == 0)
        {
            return bad("map-elites needs me_bootstrap and me_batch >= 1".into());
        }
        if self.checkpoint_every == 0 {
            return bad("checkpoint_every must be >= 1".into());
        }
        Ok(())
    }

    /// Parses the flat key-value format. Defaults come from the `env` line
    /// (which may appear anywhere); every other line overrides one field.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        let mut env = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once(char::is_whitespace).ok_or_else(|| {
                Error::InvalidConfig(format!("line {}: expected 'key value'", lineno + 1))
            })?;
            let value = value.trim();
            if key == "env" {
                env = Some(value.to_string());
            } else {
                pairs.push((lineno + 1, key.to_string(), value.to_string()));
            }
        }
        let env = env.ok_or_else(|| Error::InvalidConfig("missing 'env' line".into()))?;
        let mut config = Self::defaults_for_env(&env);

        for (lineno, key, value) in pairs {
            let parse_err =
                |what: &str| Error::InvalidConfig(format!("line {lineno}: bad {what} '{value}'"));
            macro_rules! num {
                ($what:literal) => {
                    value.parse().map_err(|_| parse_err($what))?
                };
            }
            match key.as_str() {
                "algorithm" => config.algorithm = Algorithm::parse(&value)?,
                "sigma" => config.sigma = num!("sigma"),
                "lambda" => config.lambda = num!("lambda"),
                "mu" => config.mu = num!("mu"),
                "alpha" => config.alpha = num!("alpha"),
                "alpha_icm" => config.alpha_icm = num!("alpha_icm"),
                "beta" => config.beta = num!("beta"),
                "gamma" => config.gamma = num!("gamma"),
                "icm_epochs" => config.icm_epochs = num!("icm_epochs"),
                "m" => config.m_per_individual = num!("m"),
                "phi" => config.phi = num!("phi"),
                "knn" => config.knn = num!("knn"),
                "capacity" => config.capacity = num!("capacity"),
                "batch_size" => config.batch_size = num!("batch_size"),
                "eta" => config.eta = num!("eta"),
                "horizon" => config.horizon = Some(num!("horizon")),
                "generations" => config.generations = num!("generations"),
                "seed" => config.seed = num!("seed"),
                "out" => config.out_dir = PathBuf::from(&value),
                "me_bootstrap" => config.me_bootstrap = num!("me_bootstrap"),
                "me_batch" => config.me_batch = num!("me_batch"),
                "sigma_mutation" => config.sigma_mutation = num!("sigma_mutation"),
                "fingerprints" => config.fingerprint_mode = FingerprintMode::parse(&value)?,
                "checkpoint_every" => config.checkpoint_every = num!("checkpoint_every"),
                "dump_buffer" => {
                    config.dump_buffer = value.parse().map_err(|_| parse_err("dump_buffer"))?
                }
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "line {lineno}: unknown key '{other}'"
                    )))
                }
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Fully resolved config in the same key-value format (parse round-trips).
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("algorithm {}\n", self.algorithm.name()));
        s.push_str(&format!("env {}\n", self.env));
        s.push_str(&format!("sigma {}\n", self.sigma));
        s.push_str(&format!("lambda {}\n", self.lambda));
        s.push_str(&format!("mu {}\n", self.mu));
        s.push_str(&format!("alpha {}\n", self.alpha));
        s.push_str(&format!("alpha_icm {}\n", self.alpha_icm));
        s.push_str(&format!("beta {}\n", self.beta));
        s.push_str(&format!("gamma {}\n", self.gamma));
        s.push_str(&format!("icm_epochs {}\n", self.icm_epochs));
        s.push_str(&format!("m {}\n", self.m_per_individual));
        s.push_str(&format!("phi {}\n", self.phi));
        s.push_str(&format!("knn {}\n", self.knn));
        s.push_str(&format!("capacity {}\n", self.capacity));
        s.push_str(&format!("batch_size {}\n", self.batch_size));
        s.push_str(&format!("eta {}\n", self.eta));
        if let Some(h) = self.horizon {
            s.push_str(&format!("horizon {h}\n"));
        }
        s.push_str(&format!("generations {}\n", self.generations));
        s.push_str(&format!("seed {}\n", self.seed));
        s.push_str(&format!("out {}\n", self.out_dir.display()));
        s.push_str(&format!("me_bootstrap {}\n", self.me_bootstrap));
        s.push_str(&format!("me_batch {}\n", self.me_batch));
        s.push_str(&format!("sigma_mutation {}\n", self.sigma_mutation));
        s.push_str(&format!("fingerprints {}\n", self.fingerprint_mode.name()));
        s.push_str(&format!("checkpoint_every {}\n", self.checkpoint_every));
        s.push_str(&format!("dump_buffer {}\n", self.dump_buffer));
        s
    }
}
