use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use super::{Agent, PPOConfig, Trajectory};
use crate::error::{Error, Result};
use crate::neuralnet::{ForwardTape, GaussianPolicy, GradientBundle, PolicyGradients};

/// Generalized advantage estimates of one episode. `values[t]` estimates
/// the return from step `t`; the value after the last step is zero.
pub fn gae(rewards: &[f64], values: &[f64], gamma: f64, lambda: f64) -> Vec<f64> {
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let next = if t + 1 < n { values[t + 1] } else { 0.0 };
        let delta = rewards[t] + gamma * next - values[t];
        running = delta + gamma * lambda * running;
        adv[t] = running;
    }
    adv
}

/// Per-episode, per-step advantages and value targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Advantages {
    pub advantages: Vec<Vec<f64>>,
    pub returns: Vec<Vec<f64>>,
    /// False when the batch variance was too small to rescale.
    pub normalized: bool,
}

/// GAE over every episode, then batch-wide standardization. Value targets
/// are discounted returns-to-go.
pub fn compute_advantages(trajectories: &[Trajectory], config: &PPOConfig) -> Advantages {
    let mut advantages: Vec<Vec<f64>> = trajectories
        .iter()
        .map(|t| gae(&t.rewards(), &t.values, config.gamma, config.gae_lambda))
        .collect();
    let returns = trajectories
        .iter()
        .map(|t| {
            let n = t.len();
            (0..n).map(|i| config.gamma.powi((n - 1 - i) as i32) * t.terminal_reward).collect()
        })
        .collect();
    let count: usize = advantages.iter().map(Vec::len).sum();
    let mut normalized = false;
    if count > 1 {
        let mean = advantages.iter().flatten().sum::<f64>() / count as f64;
        let var = advantages.iter().flatten().map(|a| (a - mean) * (a - mean)).sum::<f64>() / count as f64;
        if var > 1e-12 {
            let sd = var.sqrt();
            advantages.iter_mut().flatten().for_each(|a| *a = (*a - mean) / sd);
            normalized = true;
        }
    }
    Advantages { advantages, returns, normalized }
}

/// One decision step ready for an update.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub obs: Vec<f64>,
    pub slots: Vec<usize>,
    pub raw: Vec<f64>,
    pub logp_old: f64,
    pub log_jacobian: f64,
    pub advantage: f64,
    pub return_target: f64,
}

pub fn flatten_batch(trajectories: &[Trajectory], adv: &Advantages) -> Vec<Sample> {
    let mut out = Vec::new();
    for (k, t) in trajectories.iter().enumerate() {
        for i in 0..t.len() {
            out.push(Sample {
                obs: t.observations[i].clone(),
                slots: t.slots[i].clone(),
                raw: t.raw_actions[i].clone(),
                logp_old: t.logps[i],
                log_jacobian: t.log_jacobians[i],
                advantage: adv.advantages[k][i],
                return_target: adv.returns[k][i],
            });
        }
    }
    out
}

/// Clipped surrogate on a fixed set of samples and its gradient.
#[derive(Debug, Clone)]
pub struct SurrogateEval {
    /// `mean(min(r·A, clip(r, 1 − ε, 1 + ε)·A))`.
    pub objective: f64,
    /// Gradient of `objective` with respect to the policy parameters.
    pub grads: PolicyGradients,
    pub mean_ratio: f64,
    pub clip_fraction: f64,
}

pub fn clipped_surrogate(policy: &GaussianPolicy, samples: &[&Sample], clip_eps: f64) -> Result<SurrogateEval> {
    if samples.is_empty() {
        return Err(Error::Argument("empty minibatch".into()));
    }
    let m = samples.len() as f64;
    let mut grads = PolicyGradients::zeros_like(policy);
    let mut tape = ForwardTape::new();
    let (mut objective, mut ratio_sum, mut clipped) = (0.0, 0.0, 0usize);
    for s in samples {
        let logp = policy.log_prob_slots(&s.obs, &s.slots, &s.raw)? - s.log_jacobian;
        let r = (logp - s.logp_old).exp();
        let unclipped = r * s.advantage;
        let bounded = r.clamp(1.0 - clip_eps, 1.0 + clip_eps) * s.advantage;
        ratio_sum += r;
        if (r - 1.0).abs() > clip_eps {
            clipped += 1;
        }
        if bounded < unclipped {
            // The constant branch wins the min: no gradient through r.
            objective += bounded;
        } else {
            objective += unclipped;
            // ∇(r·A) = A·r·∇log π.
            policy.accumulate_log_prob_grad(&s.obs, &s.slots, &s.raw, unclipped / m, &mut tape, &mut grads)?;
        }
    }
    Ok(SurrogateEval { objective: objective / m, grads, mean_ratio: ratio_sum / m, clip_fraction: clipped as f64 / m })
}

/// Averages reported by an update phase.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateDiagnostics {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub mean_ratio: f64,
    pub clip_fraction: f64,
    pub steps: usize,
}

fn value_loss_grad(value_net: &crate::neuralnet::DenseNet, samples: &[&Sample]) -> Result<(f64, GradientBundle)> {
    let m = samples.len() as f64;
    let mut g = GradientBundle::zeros_like(value_net);
    let mut tape = ForwardTape::new();
    let mut loss = 0.0;
    for s in samples {
        let v = value_net.forward_taped(&s.obs, &mut tape)?[0];
        let d = v - s.return_target;
        loss += d * d / m;
        value_net.backward(&tape, &[2.0 * d / m], &mut g)?;
    }
    Ok((loss, g))
}

/// Clipped-surrogate policy steps and value regression, `update_epochs`
/// passes over shuffled minibatches. On a non-finite loss or gradient the
/// agent is restored to its state before the call.
pub fn ppo_update(agent: &mut Agent, batch: &[Sample], config: &PPOConfig, rng: &mut ChaCha8Rng) -> Result<UpdateDiagnostics> {
    if batch.is_empty() {
        return Err(Error::Argument("empty batch".into()));
    }
    let backup = agent.clone();
    let mut order: Vec<usize> = (0..batch.len()).collect();
    let mut diag = UpdateDiagnostics::default();
    for _ in 0..config.update_epochs {
        order.shuffle(rng);
        for chunk in order.chunks(config.minibatch_size) {
            let mb: Vec<&Sample> = chunk.iter().map(|&i| &batch[i]).collect();
            let sur = clipped_surrogate(&agent.policy, &mb, config.clip_eps)?;
            let (vloss, vgrad) = value_loss_grad(&agent.value, &mb)?;
            if !(sur.objective.is_finite() && vloss.is_finite() && sur.grads.is_finite() && vgrad.is_finite()) {
                *agent = backup;
                return Err(Error::Training(format!(
                    "non-finite loss during update (policy {}, value {vloss}); parameters restored",
                    -sur.objective
                )));
            }
            let mut loss_grads = sur.grads;
            loss_grads.scale(-1.0);
            agent.policy.adam_update(&loss_grads, config.lr_policy, &mut agent.policy_adam)?;
            crate::neuralnet::adam_step(agent.value.params_mut(), &vgrad.values, config.lr_value, &mut agent.value_adam)?;
            diag.policy_loss += -sur.objective;
            diag.value_loss += vloss;
            diag.mean_ratio += sur.mean_ratio;
            diag.clip_fraction += sur.clip_fraction;
            diag.steps += 1;
        }
    }
    let k = diag.steps as f64;
    diag.policy_loss /= k;
    diag.value_loss /= k;
    diag.mean_ratio /= k;
    diag.clip_fraction /= k;
    Ok(diag)
}

/// `(1/N) Σ_τ R(τ)·log π(τ)` and its gradient.
pub fn score_function_gradient(policy: &GaussianPolicy, trajectories: &[Trajectory]) -> Result<(f64, PolicyGradients)> {
    if trajectories.is_empty() {
        return Err(Error::Argument("empty batch".into()));
    }
    let n = trajectories.len() as f64;
    let mut grads = PolicyGradients::zeros_like(policy);
    let mut tape = ForwardTape::new();
    let mut objective = 0.0;
    for t in trajectories {
        let w = t.terminal_reward / n;
        for i in 0..t.len() {
            let lp = policy.accumulate_log_prob_grad(
                &t.observations[i],
                &t.slots[i],
                &t.raw_actions[i],
                w,
                &mut tape,
                &mut grads,
            )?;
            objective += w * (lp - t.log_jacobians[i]);
        }
    }
    Ok((objective, grads))
}

/// One plain ascent step `θ ← θ + lr·∇J` with the score-function estimate.
pub fn vanilla_pg_update(policy: &mut GaussianPolicy, trajectories: &[Trajectory], lr: f64) -> Result<UpdateDiagnostics> {
    let (objective, grads) = score_function_gradient(policy, trajectories)?;
    if !(objective.is_finite() && grads.is_finite()) {
        return Err(Error::Training("non-finite policy-gradient estimate; parameters unchanged".into()));
    }
    policy.ascent_update(&grads, lr)?;
    Ok(UpdateDiagnostics { policy_loss: -objective, mean_ratio: 1.0, steps: 1, ..Default::default() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuralnet::DenseNet;
    use rand::{Rng, SeedableRng};

    fn traj(values: Vec<f64>, reward: f64) -> Trajectory {
        let n = values.len();
        Trajectory {
            observations: vec![vec![0.0]; n],
            slots: vec![vec![0]; n],
            raw_actions: vec![vec![0.0]; n],
            logps: vec![0.0; n],
            log_jacobians: vec![0.0; n],
            values,
            action: vec![0.0],
            terminal_reward: reward,
        }
    }

    #[test]
    fn gae_hand_table() {
        // γ = 0.9, λ = 0.8, V = (0.5, 0.2, −0.1), rewards (0, 0, 1):
        // δ2 = 1 + 0.1 = 1.1
        // δ1 = 0 + 0.9·(−0.1) − 0.2 = −0.29
        // δ0 = 0 + 0.9·0.2 − 0.5 = −0.32
        // A2 = 1.1
        // A1 = −0.29 + 0.72·1.1 = 0.502
        // A0 = −0.32 + 0.72·0.502 = 0.04144
        let a = gae(&[0.0, 0.0, 1.0], &[0.5, 0.2, -0.1], 0.9, 0.8);
        for (x, y) in a.iter().zip([0.04144, 0.502, 1.1]) {
            assert!((x - y).abs() < 1e-12, "{a:?}");
        }
    }

    #[test]
    fn gae_telescopes_at_unit_lambda() {
        let v = [0.3, -0.7, 1.2, 0.05];
        let a = gae(&[0.0, 0.0, 0.0, 2.5], &v, 1.0, 1.0);
        for (ai, vi) in a.iter().zip(v) {
            assert!((ai - (2.5 - vi)).abs() < 1e-12);
        }
        assert_eq!(gae(&[0.0, 0.0, 4.0], &[0.0; 3], 1.0, 1.0), vec![4.0; 3]);
    }

    #[test]
    fn advantages_are_standardized() {
        let ts = vec![traj(vec![0.1, 0.4, -0.2], 2.0), traj(vec![0.0, 0.3, 0.5], 2.6), traj(vec![1.0, 0.0, 0.2], 1.9)];
        let adv = compute_advantages(&ts, &PPOConfig::default());
        assert!(adv.normalized);
        let all: Vec<f64> = adv.advantages.iter().flatten().copied().collect();
        let mean = all.iter().sum::<f64>() / all.len() as f64;
        let var = all.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / all.len() as f64;
        assert!(mean.abs() < 1e-10);
        assert!((var - 1.0).abs() < 1e-6);
        assert_eq!(adv.returns[1], vec![2.6; 3]);
    }

    #[test]
    fn zero_variance_batch_is_left_alone() {
        let ts = vec![traj(vec![0.0], 1.0), traj(vec![0.0], 1.0)];
        let adv = compute_advantages(&ts, &PPOConfig::default());
        assert!(!adv.normalized);
        assert_eq!(adv.advantages, vec![vec![1.0], vec![1.0]]);
    }

    fn bandit_policy(mean: f64, log_std: f64) -> GaussianPolicy {
        let mut net = DenseNet::zeros(&[2, 1]).unwrap();
        net.params_mut()[2] = mean;
        GaussianPolicy::new(net, vec![log_std]).unwrap()
    }

    fn sample(policy: &GaussianPolicy, raw: f64, ratio: f64, advantage: f64) -> Sample {
        let obs = vec![0.0, 0.0];
        let lp = policy.log_prob_slots(&obs, &[0], &[raw]).unwrap();
        Sample {
            obs,
            slots: vec![0],
            raw: vec![raw],
            logp_old: lp - ratio.ln(),
            log_jacobian: 0.0,
            advantage,
            return_target: 0.0,
        }
    }

    #[test]
    fn clipped_branch_has_zero_gradient() {
        let p = bandit_policy(0.2, -0.3);
        for (ratio, adv) in [(1.5, 2.0), (0.5, -1.0)] {
            let s = sample(&p, 0.9, ratio, adv);
            let e = clipped_surrogate(&p, &[&s], 0.2).unwrap();
            let expect = if adv > 0.0 { 1.2 } else { 0.8 } * adv;
            assert!((e.objective - expect).abs() < 1e-12);
            assert!(e.grads.flatten().iter().all(|&g| g == 0.0));
            assert_eq!(e.clip_fraction, 1.0);
        }
        // Outside the range but on the unclipped side of the min: gradient flows.
        let s = sample(&p, 0.9, 1.5, -2.0);
        let e = clipped_surrogate(&p, &[&s], 0.2).unwrap();
        assert!((e.objective + 3.0).abs() < 1e-12);
        assert!(e.grads.flatten().iter().any(|&g| g != 0.0));
    }

    #[test]
    fn identity_ratio_matches_score_function() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = GaussianPolicy::init(4, &[8], 2, &mut rng).unwrap();
        let samples: Vec<Sample> = (0..12)
            .map(|_| {
                let obs: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let slots = vec![rng.gen_range(0..2)];
                let raw = vec![rng.gen_range(-1.0..1.0)];
                let lp = p.log_prob_slots(&obs, &slots, &raw).unwrap();
                Sample { obs, slots, raw, logp_old: lp, log_jacobian: 0.0, advantage: rng.gen_range(-2.0..2.0), return_target: 0.0 }
            })
            .collect();
        let refs: Vec<&Sample> = samples.iter().collect();
        let e = clipped_surrogate(&p, &refs, 0.2).unwrap();
        let mean_adv = samples.iter().map(|s| s.advantage).sum::<f64>() / 12.0;
        assert!((e.objective - mean_adv).abs() < 1e-12);
        assert!((e.mean_ratio - 1.0).abs() < 1e-12);
        let mut reference = PolicyGradients::zeros_like(&p);
        let mut tape = ForwardTape::new();
        for s in &samples {
            p.accumulate_log_prob_grad(&s.obs, &s.slots, &s.raw, s.advantage / 12.0, &mut tape, &mut reference).unwrap();
        }
        for (a, b) in e.grads.flatten().iter().zip(reference.flatten()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_rewards_give_zero_vpg_step() {
        let mut p = bandit_policy(0.3, -0.5);
        let before = p.clone();
        let mut t = traj(vec![0.0], 0.0);
        t.observations = vec![vec![0.0, 0.0]];
        t.raw_actions = vec![vec![1.0]];
        vanilla_pg_update(&mut p, &[t], 0.1).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn vpg_moves_toward_rewarded_action() {
        let p = bandit_policy(0.0, 0.0);
        let mk = |raw: f64, r: f64| {
            let mut t = traj(vec![0.0], r);
            t.observations = vec![vec![0.0, 0.0]];
            t.raw_actions = vec![vec![raw]];
            t
        };
        let (_, g) = score_function_gradient(&p, &[mk(0.7, 1.0), mk(-0.7, -1.0)]).unwrap();
        // The bias of the mean head is the last network parameter.
        assert!(*g.net.values.last().unwrap() > 0.0);
        let (_, g) = score_function_gradient(&p, &[mk(0.7, -1.0), mk(-0.7, 1.0)]).unwrap();
        assert!(*g.net.values.last().unwrap() < 0.0);
    }
}
