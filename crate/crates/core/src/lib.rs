//! Policy search with curiosity-driven evolution strategies.
//!
//! This crate implements a complete sparse-reward policy-search stack:
//!
//! - [`nn`]: a small dense-network engine with exact backpropagation, used by
//!   policy networks (forward only) and the intrinsic curiosity module
//!   (forward + backward).
//! - [`maze`]: deterministic 2D point-mass maze environments with wall
//!   collisions and a 32-beam LIDAR.
//! - [`icm`]: the intrinsic curiosity module (encoder, forward model, inverse
//!   model) whose forward-prediction error acts as an exploration bonus.
//! - [`replay`]: the bounded transition store feeding ICM training.
//! - [`es`]: a canonical evolution strategy with log-rank recombination
//!   weights.
//! - [`fitness`]: extrinsic returns, discounted curiosity fitness, and the
//!   normalized extrinsic/intrinsic blend.
//! - [`baselines`]: novelty-search ES and a grid-archive MAP-Elites sharing
//!   the same environments and ES machinery.
//! - [`metrics`]: coverage grids, best-reward curves, policy fingerprints,
//!   and a power-iteration PCA.
//! - [`runner`]: the batch experiment loop with reports, checkpoints, and
//!   CSV/SVG artifact emission.

pub mod baselines;
pub mod config;
pub mod error;
pub mod es;
pub mod fitness;
pub mod icm;
pub mod maze;
pub mod metrics;
pub mod nn;
pub mod replay;
pub mod runner;
pub mod svg;

pub use error::{Error, Result};
