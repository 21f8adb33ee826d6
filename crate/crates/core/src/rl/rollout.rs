use std::f64::consts::LN_2;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{stream_seed, ObservationCodec, PPOConfig, Protocol};
use crate::bellenv::BellEnvironment;
use crate::error::{Error, Result};
use crate::neuralnet::{DenseNet, GaussianPolicy};

/// How an unbounded Gaussian sample is mapped into an action interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SquashKind {
    /// `lo + (hi − lo)(tanh u + 1)/2`.
    Tanh,
    /// Triangle wave of period 4 in `u`: linear with the same slope as
    /// `Tanh` at the origin, reflected at the interval ends, never flat.
    Fold,
    /// `Fold` stretched so that one unit of `u` moves the action by one
    /// unit of the interval (slope 1).
    #[default]
    Unit,
}

/// Map from a raw sample to one action component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Squash {
    pub lo: f64,
    pub hi: f64,
    pub kind: SquashKind,
}

impl Squash {
    pub fn new((lo, hi): (f64, f64), kind: SquashKind) -> Self {
        Self { lo, hi, kind }
    }

    /// Position of `u` inside the interval, in `[-1, 1]`.
    pub fn normalized(&self, u: f64) -> f64 {
        match self.kind {
            SquashKind::Tanh => u.tanh(),
            SquashKind::Fold | SquashKind::Unit => {
                let u = if self.kind == SquashKind::Unit { u / ((self.hi - self.lo) * 0.5) } else { u };
                let x = (u + 1.0).rem_euclid(4.0);
                if x <= 2.0 {
                    x - 1.0
                } else {
                    3.0 - x
                }
            }
        }
    }

    pub fn apply(&self, u: f64) -> f64 {
        self.lo + (self.hi - self.lo) * 0.5 * (self.normalized(u) + 1.0)
    }

    /// `log |d apply / du|`, stable for large `|u|`.
    pub fn log_jacobian(&self, u: f64) -> f64 {
        let half = ((self.hi - self.lo) * 0.5).ln();
        match self.kind {
            SquashKind::Tanh => {
                let a = u.abs();
                half + 2.0 * (LN_2 - a - (-2.0 * a).exp().ln_1p())
            }
            SquashKind::Fold => half,
            SquashKind::Unit => 0.0,
        }
    }
}

/// One episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub observations: Vec<Vec<f64>>,
    /// Action components addressed at each step.
    pub slots: Vec<Vec<usize>>,
    /// Unsquashed Gaussian samples at each step.
    pub raw_actions: Vec<Vec<f64>>,
    /// Log-density of each step's squashed sample.
    pub logps: Vec<f64>,
    pub log_jacobians: Vec<f64>,
    pub values: Vec<f64>,
    /// Squashed action handed to the environment.
    pub action: Vec<f64>,
    pub terminal_reward: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Rewards per step: zero except the last.
    pub fn rewards(&self) -> Vec<f64> {
        let mut r = vec![0.0; self.len()];
        if let Some(last) = r.last_mut() {
            *last = self.terminal_reward;
        }
        r
    }
}

/// Episodes of one epoch plus the ones that failed.
#[derive(Debug, Clone, Default)]
pub struct Rollouts {
    pub trajectories: Vec<Trajectory>,
    /// `(rollout index, reason)`.
    pub failures: Vec<(usize, String)>,
}

struct Episode<'a> {
    env: &'a dyn BellEnvironment,
    policy: &'a GaussianPolicy,
    value_net: &'a DenseNet,
    protocol: Protocol,
    codec: ObservationCodec,
    squash: Vec<Squash>,
}

impl<'a> Episode<'a> {
    fn new(
        env: &'a dyn BellEnvironment,
        policy: &'a GaussianPolicy,
        value_net: &'a DenseNet,
        protocol: Protocol,
        kind: SquashKind,
    ) -> Result<Self> {
        let dim = env.spec().action_dimension;
        let codec = ObservationCodec::new(dim);
        if policy.action_dim() != dim || policy.net.input_dim() != codec.len() {
            return Err(Error::Argument(format!(
                "policy shape ({} in, {} out) does not fit an environment with {dim} action components",
                policy.net.input_dim(),
                policy.action_dim()
            )));
        }
        if value_net.input_dim() != codec.len() || value_net.output_dim() != 1 {
            return Err(Error::Argument("value network shape does not fit the observation".into()));
        }
        let squash = env.spec().action_bounds.iter().map(|&b| Squash::new(b, kind)).collect();
        Ok(Self { env, policy, value_net, protocol, codec, squash })
    }

    fn run(&self, rng: Option<&mut ChaCha8Rng>) -> Result<Trajectory> {
        let dim = self.squash.len();
        let steps = self.protocol.steps(dim);
        let mut obs = self.codec.empty();
        let mut t = Trajectory {
            observations: Vec::with_capacity(steps),
            slots: Vec::with_capacity(steps),
            raw_actions: Vec::with_capacity(steps),
            logps: Vec::with_capacity(steps),
            log_jacobians: Vec::with_capacity(steps),
            values: Vec::with_capacity(steps),
            action: vec![0.0; dim],
            terminal_reward: 0.0,
        };
        let mut rng = rng;
        for step in 0..steps {
            let slots = self.protocol.slots(step, dim);
            let value = self.value_net.forward(&obs)?[0];
            let (raw, logp) = match rng.as_deref_mut() {
                Some(r) => self.policy.sample_slots(&obs, &slots, r)?,
                None => {
                    let mu = self.policy.mean(&obs)?;
                    let raw: Vec<f64> = slots.iter().map(|&i| mu[i]).collect();
                    let lp = self.policy.log_prob_slots(&obs, &slots, &raw)?;
                    (raw, lp)
                }
            };
            let log_jac: f64 = slots.iter().zip(&raw).map(|(&i, &u)| self.squash[i].log_jacobian(u)).sum();
            t.observations.push(obs.clone());
            for (&i, &u) in slots.iter().zip(&raw) {
                t.action[i] = self.squash[i].apply(u);
                self.codec.fill(&mut obs, i, self.squash[i].normalized(u));
            }
            t.slots.push(slots);
            t.raw_actions.push(raw);
            t.logps.push(logp - log_jac);
            t.log_jacobians.push(log_jac);
            t.values.push(value);
        }
        let reward = self.env.reward(&t.action)?;
        if !reward.is_finite() {
            return Err(Error::Numerical(format!("environment returned a non-finite reward {reward}")));
        }
        t.terminal_reward = reward;
        Ok(t)
    }
}

/// Runs `config.rollouts_per_epoch` episodes of epoch `epoch`. Episode `i`
/// draws from its own stream seeded by `(config.seed, epoch, i)`, so the
/// result does not depend on `config.workers`.
pub fn collect_trajectories(
    env: &dyn BellEnvironment,
    policy: &GaussianPolicy,
    value_net: &DenseNet,
    config: &PPOConfig,
    epoch: usize,
) -> Result<Rollouts> {
    let episode = Episode::new(env, policy, value_net, Protocol::from_config(config), config.squash)?;
    let n = config.rollouts_per_epoch;
    let run = |i: usize| {
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(config.seed, epoch as u64, i as u64));
        episode.run(Some(&mut rng))
    };
    let results: Vec<Result<Trajectory>> = if config.workers <= 1 || n == 1 {
        (0..n).map(run).collect()
    } else {
        let chunk = n.div_ceil(config.workers);
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..n)
                .step_by(chunk)
                .map(|start| {
                    let run = &run;
                    s.spawn(move || (start..(start + chunk).min(n)).map(run).collect::<Vec<_>>())
                })
                .collect();
            handles.into_iter().flat_map(|h| h.join().expect("rollout worker panicked")).collect()
        })
    };
    let mut out = Rollouts::default();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(t) => out.trajectories.push(t),
            Err(e) => {
                log::warn!("rollout {i} of epoch {epoch} aborted: {e}");
                out.failures.push((i, e.to_string()));
            }
        }
    }
    Ok(out)
}

/// Episode with every sample replaced by the policy mean.
pub fn deterministic_action(
    env: &dyn BellEnvironment,
    policy: &GaussianPolicy,
    value_net: &DenseNet,
    protocol: Protocol,
    kind: SquashKind,
) -> Result<Trajectory> {
    Episode::new(env, policy, value_net, protocol, kind)?.run(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bellenv::{ChshEnv, RewardMode};
    use crate::neuralnet::LOG_STD_MIN;
    use std::f64::consts::PI;

    fn nets(env: &dyn BellEnvironment, seed: u64) -> (GaussianPolicy, DenseNet) {
        let dim = env.spec().action_dimension;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = GaussianPolicy::init(2 * dim, &[16, 16], dim, &mut rng).unwrap();
        let v = DenseNet::orthogonal(&[2 * dim, 16, 1], 2f64.sqrt(), 1.0, &mut rng).unwrap();
        (p, v)
    }

    #[test]
    fn squash_maps_into_bounds() {
        for kind in [SquashKind::Tanh, SquashKind::Fold, SquashKind::Unit] {
            let s = Squash::new((-PI, PI), kind);
            assert_eq!(s.apply(0.0), 0.0);
            for u in [-50.0, -3.3, -1.0, 1.0, 2.9, 50.0] {
                assert!(s.apply(u).abs() <= PI);
            }
            let h = 1e-6;
            for u in [-3.1, -0.4, 0.0, 1.1, 2.5] {
                let fd = (s.apply(u + h) - s.apply(u - h)) / (2.0 * h);
                assert!((fd.abs().ln() - s.log_jacobian(u)).abs() < 1e-6, "{kind:?} u = {u}");
            }
            assert!(s.log_jacobian(400.0).is_finite());
        }
    }

    #[test]
    fn fold_is_a_triangle_wave() {
        let s = Squash::new((0.0, 1.0), SquashKind::Fold);
        for (u, a) in [(-1.0, 0.0), (0.0, 0.5), (1.0, 1.0), (2.0, 0.5), (3.0, 0.0), (5.0, 1.0), (-3.0, 1.0), (-2.5, 0.75)] {
            assert!((s.apply(u) - a).abs() < 1e-12, "u = {u}");
        }
    }

    #[test]
    fn unit_fold_has_slope_one() {
        let s = Squash::new((0.0, PI), SquashKind::Unit);
        for (u, a) in [(0.0, 0.5 * PI), (1.0, 0.5 * PI + 1.0), (-1.5, 0.5 * PI - 1.5), (0.5 * PI + 0.25, PI - 0.25)] {
            assert!((s.apply(u) - a).abs() < 1e-12, "u = {u}");
        }
        assert_eq!(s.log_jacobian(3.0), 0.0);
    }

    #[test]
    fn chsh_eigen_horizon_is_four() {
        let env = ChshEnv::new(RewardMode::ExactDiag, 0).unwrap();
        let (p, v) = nets(&env, 0);
        let config = PPOConfig { rollouts_per_epoch: 3, ..PPOConfig::default() };
        let r = collect_trajectories(&env, &p, &v, &config, 0).unwrap();
        assert_eq!(r.trajectories.len(), 3);
        for t in &r.trajectories {
            assert_eq!(t.len(), 4);
            assert_eq!(t.rewards()[..3], [0.0; 3]);
            assert_eq!(t.terminal_reward, env.reward(&t.action).unwrap());
            assert_eq!(t.observations[0], vec![0.0; 8]);
            assert_eq!(t.observations[2][4..], [1.0, 1.0, 0.0, 0.0]);
            assert!(t.action.iter().all(|a| a.abs() <= PI));
        }
    }

    #[test]
    fn collection_is_seeded_and_worker_independent() {
        let env = ChshEnv::new(RewardMode::FullRL, 0).unwrap();
        let (p, v) = nets(&env, 1);
        let config = PPOConfig { rollouts_per_epoch: 7, seed: 42, ..PPOConfig::default() };
        let a = collect_trajectories(&env, &p, &v, &config, 3).unwrap();
        let b = collect_trajectories(&env, &p, &v, &config, 3).unwrap();
        let c = collect_trajectories(&env, &p, &v, &PPOConfig { workers: 3, ..config.clone() }, 3).unwrap();
        assert_eq!(a.trajectories, b.trajectories);
        assert_eq!(a.trajectories, c.trajectories);
        let d = collect_trajectories(&env, &p, &v, &config, 4).unwrap();
        assert_ne!(a.trajectories, d.trajectories);
    }

    #[test]
    fn narrow_policy_gives_nearly_identical_rollouts() {
        let env = ChshEnv::new(RewardMode::ExactDiag, 0).unwrap();
        let (mut p, v) = nets(&env, 2);
        p.set_log_std(&[LOG_STD_MIN; 4]).unwrap();
        let config = PPOConfig { rollouts_per_epoch: 16, ..PPOConfig::default() };
        let r = collect_trajectories(&env, &p, &v, &config, 0).unwrap();
        let det = deterministic_action(&env, &p, &v, Protocol::Sequential, SquashKind::Fold).unwrap();
        for t in &r.trajectories {
            for (a, b) in t.action.iter().zip(&det.action) {
                assert!((a - b).abs() < 0.1);
            }
        }
    }

    #[test]
    fn single_shot_uses_one_step() {
        let env = ChshEnv::new(RewardMode::ExactDiag, 0).unwrap();
        let (p, v) = nets(&env, 3);
        let config = PPOConfig { rollouts_per_epoch: 2, single_shot: true, ..PPOConfig::default() };
        let r = collect_trajectories(&env, &p, &v, &config, 0).unwrap();
        assert_eq!(r.trajectories[0].len(), 1);
        assert_eq!(r.trajectories[0].raw_actions[0].len(), 4);
    }

    #[test]
    fn mismatched_policy_is_rejected() {
        let env = ChshEnv::new(RewardMode::ExactDiag, 0).unwrap();
        let full = ChshEnv::new(RewardMode::FullRL, 0).unwrap();
        let (p, v) = nets(&full, 0);
        assert!(collect_trajectories(&env, &p, &v, &PPOConfig::default(), 0).is_err());
    }
}
