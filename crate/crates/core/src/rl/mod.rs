//! Episodic policy optimization over Bell-inequality environments.
//!
//! An episode picks the action vector one component per step, each step
//! seeing the components chosen so far, and earns the environment reward
//! once at the end.

mod rollout;
mod train;
mod update;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neuralnet::DEFAULT_HIDDEN;

pub use rollout::{collect_trajectories, deterministic_action, Rollouts, Squash, SquashKind, Trajectory};
pub use train::{train, Agent, EpochStats, TrainOutcome};
pub use update::{
    clipped_surrogate, compute_advantages, flatten_batch, gae, ppo_update, score_function_gradient,
    vanilla_pg_update, Advantages, Sample, SurrogateEval, UpdateDiagnostics,
};

/// Which policy-gradient rule drives the update phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Ppo,
    Vpg,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Ppo => "ppo",
            Algorithm::Vpg => "vpg",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ppo" => Ok(Algorithm::Ppo),
            "vpg" => Ok(Algorithm::Vpg),
            other => Err(Error::Config(format!("unknown algorithm `{other}` (expected ppo or vpg)"))),
        }
    }
}

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PPOConfig {
    pub clip_eps: f64,
    pub rollouts_per_epoch: usize,
    pub update_epochs: usize,
    pub minibatch_size: usize,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub lr_policy: f64,
    pub lr_value: f64,
    pub epochs: usize,
    pub seed: u64,
    pub hidden: Vec<usize>,
    pub algorithm: Algorithm,
    /// Pick the whole action in one step instead of one component per step.
    pub single_shot: bool,
    /// Threads used for rollout collection.
    pub workers: usize,
    pub squash: SquashKind,
    /// Both learning rates decay linearly to this fraction of their initial
    /// value over the run; 1 keeps them constant.
    pub lr_end_fraction: f64,
    /// Learn from `reward − classical_bound`; statistics stay raw.
    pub center_reward: bool,
}

impl Default for PPOConfig {
    fn default() -> Self {
        Self {
            clip_eps: 0.2,
            rollouts_per_epoch: 64,
            update_epochs: 10,
            minibatch_size: 256,
            gamma: 1.0,
            gae_lambda: 0.95,
            lr_policy: 1e-3,
            lr_value: 1e-3,
            epochs: 200,
            seed: 0,
            hidden: DEFAULT_HIDDEN.to_vec(),
            algorithm: Algorithm::Ppo,
            single_shot: false,
            workers: 1,
            squash: SquashKind::Unit,
            lr_end_fraction: 0.3,
            center_reward: false,
        }
    }
}

impl PPOConfig {
    /// `epochs = 0` is allowed and means "evaluate the initial policy".
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return bad("clip_eps must lie in (0, 1)");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gae_lambda must lie in [0, 1]");
        }
        if self.rollouts_per_epoch == 0 || self.update_epochs == 0 || self.minibatch_size == 0 || self.workers == 0 {
            return bad("rollouts, update epochs, minibatch size and workers must be at least 1");
        }
        if !(self.lr_policy.is_finite() && self.lr_policy > 0.0 && self.lr_value.is_finite() && self.lr_value > 0.0) {
            return bad("learning rates must be positive");
        }
        if !(self.lr_end_fraction > 0.0 && self.lr_end_fraction <= 1.0) {
            return bad("lr_end_fraction must lie in (0, 1]");
        }
        if self.hidden.iter().any(|&w| w == 0) {
            return bad("hidden layer widths must be positive");
        }
        Ok(())
    }
}

/// Fixed-length observation: one slot per action component holding its
/// normalized value in `[-1, 1]`, followed by a mask of filled slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObservationCodec {
    horizon: usize,
}

impl ObservationCodec {
    pub fn new(horizon: usize) -> Self {
        Self { horizon }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn len(&self) -> usize {
        2 * self.horizon
    }

    pub fn is_empty(&self) -> bool {
        self.horizon == 0
    }

    pub fn empty(&self) -> Vec<f64> {
        vec![0.0; self.len()]
    }

    pub fn fill(&self, obs: &mut [f64], slot: usize, normalized: f64) {
        obs[slot] = normalized;
        obs[self.horizon + slot] = 1.0;
    }

    /// Observation after the first `filled.len()` slots have been chosen.
    pub fn encode(&self, filled: &[f64]) -> Vec<f64> {
        let mut obs = self.empty();
        for (i, &v) in filled.iter().enumerate() {
            self.fill(&mut obs, i, v);
        }
        obs
    }
}

/// Order in which action components are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    Sequential,
    SingleShot,
}

impl Protocol {
    pub fn from_config(config: &PPOConfig) -> Self {
        if config.single_shot {
            Protocol::SingleShot
        } else {
            Protocol::Sequential
        }
    }

    pub fn steps(self, action_dim: usize) -> usize {
        match self {
            Protocol::Sequential => action_dim,
            Protocol::SingleShot => 1,
        }
    }

    pub fn slots(self, step: usize, action_dim: usize) -> Vec<usize> {
        match self {
            Protocol::Sequential => vec![step],
            Protocol::SingleShot => (0..action_dim).collect(),
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of an independent random stream labelled by `(seed, a, b)`.
pub fn stream_seed(seed: u64, a: u64, b: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ a) ^ b)
}
