use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bellenv::{BellEnvironment, RewardMode};
use crate::error::{arg_err, Result};

/// Search spaces with at most this many dimensions are gridded.
pub const GRID_MAX_DIMS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMethod {
    Grid,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub best_value: f64,
    /// Full environment action of the best candidate.
    pub best_action: Vec<f64>,
    pub resolution: f64,
    pub evaluations: u64,
    pub method: SearchMethod,
    /// Grid points actually searched over (after any reduction).
    pub dims: usize,
    /// The grid had more points than the budget allowed.
    pub incomplete: bool,
}

/// Box of candidate points and the map taking one to an environment action.
pub struct SearchSpace {
    pub bounds: Vec<(f64, f64)>,
    lift: Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
}

impl SearchSpace {
    /// Every action component searched independently.
    pub fn full(env: &dyn BellEnvironment) -> Self {
        Self { bounds: env.spec().action_bounds.clone(), lift: Box::new(|x| x.to_vec()) }
    }

    /// Drops directions along which the optimal value cannot change.
    ///
    /// With the state chosen by diagonalization, rotating every measurement
    /// of one party about the y axis leaves the spectrum unchanged, so only
    /// angle differences matter: CHSH reduces to `(a2, b2)` with
    /// `a1 = b1 = 0`, and shared-angle many-body forms to `θ1` with `θ0 = 0`.
    pub fn reduced(env: &dyn BellEnvironment) -> Self {
        let spec = env.spec();
        let full = spec.action_bounds.clone();
        if spec.mode != RewardMode::ExactDiag {
            return Self::full(env);
        }
        match (env.name(), spec.action_dimension) {
            ("chsh", 4) => Self {
                bounds: vec![full[1], full[3]],
                lift: Box::new(|x| vec![0.0, x[0], 0.0, x[1]]),
            },
            ("mbi" | "dicke", 2) => Self { bounds: vec![full[1]], lift: Box::new(|x| vec![0.0, x[0]]) },
            _ => Self::full(env),
        }
    }

    pub fn dims(&self) -> usize {
        self.bounds.len()
    }

    pub fn lift(&self, x: &[f64]) -> Vec<f64> {
        (self.lift)(x)
    }

    /// Number of grid points, saturating at `u64::MAX`.
    pub fn grid_count(&self, resolution: f64) -> u64 {
        self.bounds
            .iter()
            .map(|&(lo, hi)| points_per_axis(lo, hi, resolution) as u64)
            .fold(1u64, |acc, k| acc.saturating_mul(k))
    }
}

/// `⌊span / resolution⌋ + 1` points `lo, lo + r, …` along one axis.
pub fn points_per_axis(lo: f64, hi: f64, resolution: f64) -> usize {
    ((hi - lo) / resolution + 1e-9).floor() as usize + 1
}

/// Best environment reward over the reduced search space of `env`: an
/// exhaustive grid for small spaces, otherwise `budget` uniform samples.
pub fn run_oracle(env: &dyn BellEnvironment, resolution: f64, budget: u64, seed: u64) -> Result<OracleResult> {
    search(env, &SearchSpace::reduced(env), resolution, budget, seed)
}

pub fn search(
    env: &dyn BellEnvironment,
    space: &SearchSpace,
    resolution: f64,
    budget: u64,
    seed: u64,
) -> Result<OracleResult> {
    if !(resolution.is_finite() && resolution > 0.0) {
        return arg_err("oracle resolution must be positive");
    }
    if budget == 0 {
        return arg_err("oracle budget must be at least 1");
    }
    let mut best = (f64::NEG_INFINITY, Vec::new());
    let mut consider = |x: &[f64]| -> Result<()> {
        let action = space.lift(x);
        let v = env.reward(&action)?;
        if v > best.0 {
            best = (v, action);
        }
        Ok(())
    };
    let dims = space.dims();
    let (method, evaluations, incomplete) = if dims <= GRID_MAX_DIMS {
        let axes: Vec<usize> = space.bounds.iter().map(|&(lo, hi)| points_per_axis(lo, hi, resolution)).collect();
        let total = space.grid_count(resolution);
        let n = total.min(budget);
        let mut idx = vec![0usize; dims];
        let mut x: Vec<f64> = space.bounds.iter().map(|b| b.0).collect();
        for _ in 0..n {
            for (d, &k) in idx.iter().enumerate() {
                x[d] = space.bounds[d].0 + k as f64 * resolution;
            }
            consider(&x)?;
            for d in (0..dims).rev() {
                idx[d] += 1;
                if idx[d] < axes[d] {
                    break;
                }
                idx[d] = 0;
            }
        }
        (SearchMethod::Grid, n, total > budget)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = vec![0.0; dims];
        for _ in 0..budget {
            for (xi, &(lo, hi)) in x.iter_mut().zip(&space.bounds) {
                *xi = rng.gen_range(lo..hi);
            }
            consider(&x)?;
        }
        (SearchMethod::Random, budget, false)
    };
    Ok(OracleResult { best_value: best.0, best_action: best.1, resolution, evaluations, method, dims, incomplete })
}
