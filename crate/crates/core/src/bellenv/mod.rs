//! Bell inequalities as reward functions.
//!
//! Each environment is a stateless map from an action (a vector of angles)
//! to a scalar reward. Larger is always better: ceiling-type inequalities
//! (CHSH, bilocality) report the Bell value itself, floor-type inequalities
//! (the many-body ones) report the violation magnitude, positive exactly
//! when the classical bound is broken.

mod bilocal;
mod chsh;
mod game;
mod manybody;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use bilocal::{bilocality_value, bilocality_value_with, BilocalEnv, BilocalityValue, BobSettings};
pub use chsh::{chsh_operator, chsh_reward, ChshEnv};
pub use game::{
    behaviour_from_quantum, chsh_deterministic_value, classical_bound_chsh, winning_probability, BellGame, Behaviour,
};
pub use manybody::{
    dicke_coefficients, dicke_reward, mbi_reward, symmetric_bell_operator, symmetrized_correlators,
    symmetrized_correlators_per_site, BellForm, DickeCoefficients, Inequality, ManyBodyEnv, SiteAngles,
    SymmetrizedCorrelators,
};

use crate::error::{Error, Result};

/// How the quantum state entering the reward is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardMode {
    /// State supplied up front; the agent picks measurements only.
    #[serde(rename = "fixed")]
    FixedState,
    /// Optimal state for the chosen measurements via the extreme eigenvalue.
    #[serde(rename = "eigen")]
    ExactDiag,
    /// The agent also picks hyperspherical state angles.
    #[serde(rename = "full")]
    FullRL,
    /// The agent picks variational-circuit angles.
    Ansatz,
}

impl RewardMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RewardMode::FixedState => "fixed",
            RewardMode::ExactDiag => "eigen",
            RewardMode::FullRL => "full",
            RewardMode::Ansatz => "ansatz",
        }
    }
}

impl fmt::Display for RewardMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RewardMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" | "fixed-state" => Ok(RewardMode::FixedState),
            "eigen" | "exact" | "exact-diag" => Ok(RewardMode::ExactDiag),
            "full" | "full-rl" => Ok(RewardMode::FullRL),
            "ansatz" | "variational" => Ok(RewardMode::Ansatz),
            other => Err(Error::Config(format!("unknown mode `{other}` (expected fixed, eigen, full or ansatz)"))),
        }
    }
}

/// `(n, m, k)`: parties, settings per party, outcomes per setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BellScenario {
    pub n_parties: usize,
    pub settings_per_party: usize,
    pub outcomes: usize,
}

impl BellScenario {
    pub fn new(n_parties: usize, settings_per_party: usize, outcomes: usize) -> Result<Self> {
        if n_parties == 0 || settings_per_party == 0 || outcomes == 0 {
            return Err(Error::Argument("scenario entries must be positive".into()));
        }
        Ok(Self { n_parties, settings_per_party, outcomes })
    }
}

/// Static description of an environment: the pieces of the decision process
/// that do not change during a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSpec {
    pub scenario: BellScenario,
    pub mode: RewardMode,
    pub n_qubits: usize,
    pub action_dimension: usize,
    pub action_bounds: Vec<(f64, f64)>,
    pub classical_bound: f64,
    pub quantum_bound: Option<f64>,
}

impl EnvironmentSpec {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.action_dimension == 0 || self.action_bounds.len() != self.action_dimension {
            return Err(Error::Argument("action bounds must cover every action component".into()));
        }
        if self.action_bounds.iter().any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo < hi)) {
            return Err(Error::Argument("action bounds must be finite with low < high".into()));
        }
        if !self.classical_bound.is_finite() {
            return Err(Error::Argument("classical bound must be finite".into()));
        }
        Ok(())
    }

    /// Rejects actions of the wrong length or with non-finite entries.
    pub fn check_action(&self, action: &[f64]) -> Result<()> {
        if action.len() != self.action_dimension {
            return Err(Error::Argument(format!(
                "action has {} components, environment expects {}",
                action.len(),
                self.action_dimension
            )));
        }
        if action.iter().any(|a| !a.is_finite()) {
            return Err(Error::Argument("action components must be finite".into()));
        }
        Ok(())
    }
}

/// A Bell inequality turned into a reward.
pub trait BellEnvironment: Send + Sync {
    /// Selection string used on the command line.
    fn name(&self) -> &'static str;

    fn spec(&self) -> &EnvironmentSpec;

    /// Raw Bell value of an action; deterministic.
    fn reward(&self, action: &[f64]) -> Result<f64>;

    /// Circuit angle matrix carried by an action, for variational modes.
    fn ansatz_angles(&self, _action: &[f64]) -> Option<Vec<Vec<f64>>> {
        None
    }
}

/// Bounds of a measurement angle chosen by the agent.
pub const MEASUREMENT_BOUNDS: (f64, f64) = (-PI, PI);
/// Bounds of a variational rotation angle.
pub const ANSATZ_BOUNDS: (f64, f64) = (-PI, PI);

/// Bounds of `2^n − 1` hyperspherical angles: `[0, π]` each, the last one
/// `[0, 2π)`.
pub fn hyperspherical_bounds(n_qubits: usize) -> Vec<(f64, f64)> {
    let k = (1usize << n_qubits) - 1;
    (0..k).map(|i| if i + 1 == k { (0.0, 2.0 * PI) } else { (0.0, PI) }).collect()
}

/// Environment options beyond name and mode.
#[derive(Debug, Clone)]
pub struct EnvOptions {
    pub n_qubits: usize,
    pub layers: usize,
    pub per_site: bool,
}

impl Default for EnvOptions {
    fn default() -> Self {
        Self { n_qubits: 4, layers: 3, per_site: false }
    }
}

/// Environment names accepted by [`make_env`].
pub const ENV_NAMES: [&str; 4] = ["chsh", "bilocal", "mbi", "dicke"];

/// Builds an environment from its selection string.
pub fn make_env(name: &str, mode: RewardMode, opts: &EnvOptions) -> Result<Box<dyn BellEnvironment>> {
    Ok(match name {
        "chsh" => Box::new(ChshEnv::new(mode, opts.layers)?),
        "bilocal" => Box::new(BilocalEnv::new(mode)?),
        "mbi" => Box::new(ManyBodyEnv::new(Inequality::Mbi, mode, opts.n_qubits, opts.layers, opts.per_site)?),
        "dicke" => Box::new(ManyBodyEnv::new(
            Inequality::Dicke(dicke_coefficients(opts.n_qubits)?),
            mode,
            opts.n_qubits,
            opts.layers,
            opts.per_site,
        )?),
        other => {
            return Err(Error::Config(format!(
                "unknown environment `{other}` (expected one of {})",
                ENV_NAMES.join(", ")
            )))
        }
    })
}

/// Default reward mode of each environment.
pub fn default_mode(name: &str) -> RewardMode {
    match name {
        "bilocal" => RewardMode::FullRL,
        "dicke" => RewardMode::Ansatz,
        _ => RewardMode::ExactDiag,
    }
}
