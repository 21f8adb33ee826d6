use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    collect_trajectories, compute_advantages, deterministic_action, flatten_batch, ppo_update, stream_seed,
    vanilla_pg_update, Algorithm, ObservationCodec, PPOConfig, Protocol, UpdateDiagnostics,
};
use crate::bellenv::BellEnvironment;
use crate::error::{Error, Result};
use crate::neuralnet::{AdamState, DenseNet, GaussianPolicy, PolicyAdam};

/// Policy, value network and their optimizer state.
#[derive(Debug, Clone)]
pub struct Agent {
    pub policy: GaussianPolicy,
    pub value: DenseNet,
    pub policy_adam: PolicyAdam,
    pub value_adam: AdamState,
}

impl Agent {
    /// Fresh networks for an `action_dim`-component action.
    pub fn new(action_dim: usize, hidden: &[usize], seed: u64) -> Result<Self> {
        let obs_dim = ObservationCodec::new(action_dim).len();
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, u64::MAX, 0));
        let policy = GaussianPolicy::init(obs_dim, hidden, action_dim, &mut rng)?;
        let sizes: Vec<usize> = std::iter::once(obs_dim).chain(hidden.iter().copied()).chain([1]).collect();
        let value = DenseNet::orthogonal(&sizes, 2f64.sqrt(), 1.0, &mut rng)?;
        Ok(Self {
            policy_adam: PolicyAdam::new(&policy),
            value_adam: AdamState::new(value.n_params()),
            policy,
            value,
        })
    }
}

/// Reward statistics of one epoch's successful rollouts; epochs count from 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_reward: f64,
    pub max_reward: f64,
    /// Population standard deviation.
    pub std_reward: f64,
}

impl EpochStats {
    pub fn from_rewards(epoch: usize, rewards: &[f64]) -> Self {
        let n = rewards.len() as f64;
        let mean = rewards.iter().sum::<f64>() / n;
        let var = rewards.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
        let max = rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self { epoch, mean_reward: mean, max_reward: max, std_reward: var.sqrt() }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub stats: Vec<EpochStats>,
    pub best_reward: f64,
    pub best_action: Vec<f64>,
    /// Networks that produced the best action.
    pub best_policy: GaussianPolicy,
    pub best_value: DenseNet,
    /// Networks after the last update.
    pub agent: Agent,
    pub failed_rollouts: usize,
}

struct Best {
    reward: f64,
    action: Vec<f64>,
    policy: GaussianPolicy,
    value: DenseNet,
}

impl Best {
    fn offer(&mut self, reward: f64, action: &[f64], agent: &Agent) {
        if reward > self.reward {
            self.reward = reward;
            self.action = action.to_vec();
            self.policy = agent.policy.clone();
            self.value = agent.value.clone();
        }
    }
}

/// Learning rates for 0-based `epoch`, interpolated linearly from the
/// initial values to `lr_end_fraction` of them at the last epoch.
fn annealed(config: &PPOConfig, epoch: usize) -> PPOConfig {
    let mut c = config.clone();
    let progress = if config.epochs > 1 { epoch as f64 / (config.epochs - 1) as f64 } else { 0.0 };
    let f = 1.0 - (1.0 - config.lr_end_fraction) * progress;
    c.lr_policy *= f;
    c.lr_value *= f;
    c
}

/// Collect, estimate advantages, update; `config.epochs` times. The mean
/// action of the final policy is scored as well. `on_epoch` sees each
/// epoch's statistics as soon as they are known.
pub fn train(
    env: &dyn BellEnvironment,
    config: &PPOConfig,
    mut on_epoch: impl FnMut(&EpochStats, &UpdateDiagnostics),
) -> Result<TrainOutcome> {
    config.validate()?;
    let dim = env.spec().action_dimension;
    let protocol = Protocol::from_config(config);
    let mut agent = Agent::new(dim, &config.hidden, config.seed)?;
    let mut update_rng = ChaCha8Rng::seed_from_u64(stream_seed(config.seed, u64::MAX, 1));
    let mut best = Best {
        reward: f64::NEG_INFINITY,
        action: Vec::new(),
        policy: agent.policy.clone(),
        value: agent.value.clone(),
    };
    let mut stats = Vec::with_capacity(config.epochs);
    let mut failed = 0;

    for epoch in 0..config.epochs {
        let rollouts = collect_trajectories(env, &agent.policy, &agent.value, config, epoch)?;
        failed += rollouts.failures.len();
        let mut trajectories = rollouts.trajectories;
        if trajectories.is_empty() {
            let reason = rollouts.failures.first().map(|f| f.1.clone()).unwrap_or_default();
            return Err(Error::Training(format!("every rollout of epoch {epoch} failed: {reason}")));
        }
        let rewards: Vec<f64> = trajectories.iter().map(|t| t.terminal_reward).collect();
        let s = EpochStats::from_rewards(epoch + 1, &rewards);
        if let Some(t) = trajectories.iter().find(|t| t.terminal_reward == s.max_reward) {
            best.offer(t.terminal_reward, &t.action, &agent);
        }
        if config.center_reward {
            let shift = env.spec().classical_bound;
            trajectories.iter_mut().for_each(|t| t.terminal_reward -= shift);
        }
        let scaled = annealed(config, epoch);
        let diag = match config.algorithm {
            Algorithm::Ppo => {
                let adv = compute_advantages(&trajectories, config);
                let batch = flatten_batch(&trajectories, &adv);
                ppo_update(&mut agent, &batch, &scaled, &mut update_rng)?
            }
            Algorithm::Vpg => vanilla_pg_update(&mut agent.policy, &trajectories, scaled.lr_policy)?,
        };
        log::debug!(
            "epoch {epoch}: mean {:.4} max {:.4} std {:.4} ratio {:.3} clip {:.3}",
            s.mean_reward,
            s.max_reward,
            s.std_reward,
            diag.mean_ratio,
            diag.clip_fraction
        );
        on_epoch(&s, &diag);
        stats.push(s);
    }

    let det = deterministic_action(env, &agent.policy, &agent.value, protocol, config.squash)?;
    best.offer(det.terminal_reward, &det.action, &agent);
    Ok(TrainOutcome {
        stats,
        best_reward: best.reward,
        best_action: best.action,
        best_policy: best.policy,
        best_value: best.value,
        agent,
        failed_rollouts: failed,
    })
}
