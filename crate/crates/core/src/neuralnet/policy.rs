use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{adam_step, AdamState, DenseNet, ForwardTape, GradientBundle};
use crate::error::{arg_err, Result};

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;
pub const LOG_STD_INIT: f64 = -0.5;

/// Diagonal Gaussian with network mean and a free per-dimension log-std.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    pub net: DenseNet,
    log_std: Vec<f64>,
}

/// Gradients of a scalar with respect to a [`GaussianPolicy`].
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyGradients {
    pub net: GradientBundle,
    pub log_std: Vec<f64>,
}

impl PolicyGradients {
    pub fn zeros_like(policy: &GaussianPolicy) -> Self {
        Self { net: GradientBundle::zeros_like(&policy.net), log_std: vec![0.0; policy.log_std.len()] }
    }

    pub fn reset(&mut self) {
        self.net.reset();
        self.log_std.iter_mut().for_each(|g| *g = 0.0);
    }

    pub fn scale(&mut self, s: f64) {
        self.net.scale(s);
        self.log_std.iter_mut().for_each(|g| *g *= s);
    }

    pub fn is_finite(&self) -> bool {
        self.net.is_finite() && self.log_std.iter().all(|g| g.is_finite())
    }

    /// All components as one vector, network first.
    pub fn flatten(&self) -> Vec<f64> {
        self.net.values.iter().chain(&self.log_std).copied().collect()
    }
}

/// Adam moments for both parameter groups of a policy.
#[derive(Debug, Clone)]
pub struct PolicyAdam {
    net: AdamState,
    log_std: AdamState,
}

impl PolicyAdam {
    pub fn new(policy: &GaussianPolicy) -> Self {
        Self { net: AdamState::new(policy.net.n_params()), log_std: AdamState::new(policy.log_std.len()) }
    }
}

/// `log N(x; μ, e^{2s})`.
pub fn gaussian_log_density(x: f64, mean: f64, log_std: f64) -> f64 {
    let z = (x - mean) * (-log_std).exp();
    -0.5 * z * z - log_std - 0.5 * (2.0 * PI).ln()
}

impl GaussianPolicy {
    pub fn new(net: DenseNet, log_std: Vec<f64>) -> Result<Self> {
        if log_std.len() != net.output_dim() {
            return arg_err("log_std length must equal the network output dimension");
        }
        if log_std.iter().any(|s| !s.is_finite()) {
            return arg_err("log_std must be finite");
        }
        let mut p = Self { net, log_std };
        p.clamp_log_std();
        Ok(p)
    }

    /// Orthogonal init (gain √2 hidden, 0.01 output) and log-std −0.5.
    pub fn init<R: Rng + ?Sized>(obs_dim: usize, hidden: &[usize], act_dim: usize, rng: &mut R) -> Result<Self> {
        let sizes: Vec<usize> = std::iter::once(obs_dim).chain(hidden.iter().copied()).chain([act_dim]).collect();
        let net = DenseNet::orthogonal(&sizes, 2f64.sqrt(), 0.01, rng)?;
        Self::new(net, vec![LOG_STD_INIT; act_dim])
    }

    pub fn action_dim(&self) -> usize {
        self.log_std.len()
    }

    pub fn log_std(&self) -> &[f64] {
        &self.log_std
    }

    pub fn set_log_std(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.log_std.len() || values.iter().any(|v| !v.is_finite()) {
            return arg_err("log_std must be finite with one entry per action dimension");
        }
        self.log_std.copy_from_slice(values);
        self.clamp_log_std();
        Ok(())
    }

    fn clamp_log_std(&mut self) {
        self.log_std.iter_mut().for_each(|s| *s = s.clamp(LOG_STD_MIN, LOG_STD_MAX));
    }

    pub fn mean(&self, obs: &[f64]) -> Result<Vec<f64>> {
        self.net.forward(obs)
    }

    /// Joint log-density of the full action vector.
    pub fn log_prob(&self, obs: &[f64], action: &[f64]) -> Result<f64> {
        let slots: Vec<usize> = (0..self.action_dim()).collect();
        self.log_prob_slots(obs, &slots, action)
    }

    /// Log-density of `values[k]` under output component `slots[k]`.
    pub fn log_prob_slots(&self, obs: &[f64], slots: &[usize], values: &[f64]) -> Result<f64> {
        self.check_slots(slots, values)?;
        let mu = self.mean(obs)?;
        Ok(slots.iter().zip(values).map(|(&i, &x)| gaussian_log_density(x, mu[i], self.log_std[i])).sum())
    }

    pub fn sample_action<R: Rng + ?Sized>(&self, obs: &[f64], rng: &mut R) -> Result<(Vec<f64>, f64)> {
        let slots: Vec<usize> = (0..self.action_dim()).collect();
        self.sample_slots(obs, &slots, rng)
    }

    /// Samples only the listed components; returns values and their log-density.
    pub fn sample_slots<R: Rng + ?Sized>(&self, obs: &[f64], slots: &[usize], rng: &mut R) -> Result<(Vec<f64>, f64)> {
        if slots.iter().any(|&i| i >= self.action_dim()) {
            return arg_err("action slot out of range");
        }
        let mu = self.mean(obs)?;
        let mut logp = 0.0;
        let values = slots
            .iter()
            .map(|&i| {
                let z: f64 = rng.sample(StandardNormal);
                let x = mu[i] + self.log_std[i].exp() * z;
                logp += gaussian_log_density(x, mu[i], self.log_std[i]);
                x
            })
            .collect();
        Ok((values, logp))
    }

    fn check_slots(&self, slots: &[usize], values: &[f64]) -> Result<()> {
        if slots.len() != values.len() {
            return arg_err("slot and value lists differ in length");
        }
        if slots.iter().any(|&i| i >= self.action_dim()) {
            return arg_err("action slot out of range");
        }
        Ok(())
    }

    /// Adds `coeff·∇ log π(values | obs)` to `grads` and returns the log-density.
    pub fn accumulate_log_prob_grad(
        &self,
        obs: &[f64],
        slots: &[usize],
        values: &[f64],
        coeff: f64,
        tape: &mut ForwardTape,
        grads: &mut PolicyGradients,
    ) -> Result<f64> {
        self.check_slots(slots, values)?;
        let mu = self.net.forward_taped(obs, tape)?.to_vec();
        let mut adjoint = vec![0.0; mu.len()];
        let mut logp = 0.0;
        for (&i, &x) in slots.iter().zip(values) {
            let s = self.log_std[i];
            logp += gaussian_log_density(x, mu[i], s);
            let inv_var = (-2.0 * s).exp();
            let d = x - mu[i];
            adjoint[i] += coeff * d * inv_var;
            // A clamped log-std still receives its gradient; the clamp is reapplied after each step.
            grads.log_std[i] += coeff * (d * d * inv_var - 1.0);
        }
        if coeff != 0.0 {
            self.net.backward(tape, &adjoint, &mut grads.net)?;
        }
        Ok(logp)
    }

    /// Adam descent on `grads` (the gradient of a loss), then re-clamps log-std.
    pub fn adam_update(&mut self, grads: &PolicyGradients, lr: f64, state: &mut PolicyAdam) -> Result<()> {
        adam_step(self.net.params_mut(), &grads.net.values, lr, &mut state.net)?;
        adam_step(&mut self.log_std, &grads.log_std, lr, &mut state.log_std)?;
        self.clamp_log_std();
        Ok(())
    }

    /// Plain ascent along `grads` (the gradient of an objective).
    pub fn ascent_update(&mut self, grads: &PolicyGradients, lr: f64) -> Result<()> {
        super::ascent_step(self.net.params_mut(), &grads.net.values, lr)?;
        super::ascent_step(&mut self.log_std, &grads.log_std, lr)?;
        self.clamp_log_std();
        Ok(())
    }
}
