use std::f64::consts::SQRT_2;

use super::{hyperspherical_bounds, BellEnvironment, BellScenario, EnvironmentSpec, RewardMode};
use super::{ANSATZ_BOUNDS, MEASUREMENT_BOUNDS};
use crate::ansatz::{build_state, CircuitParams};
use crate::error::{arg_err, Result};
use crate::qsim::{
    dichotomic_observable, expectation, extreme_eigenvalue, hyperspherical_state, kron, MeasurementAngles, Operator,
    StateVector, Which,
};

/// `A1⊗B1 + A1⊗B2 + A2⊗B1 − A2⊗B2`.
pub fn chsh_operator(
    a1: MeasurementAngles,
    a2: MeasurementAngles,
    b1: MeasurementAngles,
    b2: MeasurementAngles,
) -> Operator {
    let [a1, a2, b1, b2] = [a1, a2, b1, b2].map(dichotomic_observable);
    let mut op = kron(&a1, &b1).expect("4x4");
    op.add_scaled(1.0, &kron(&a1, &b2).expect("4x4")).expect("same dim");
    op.add_scaled(1.0, &kron(&a2, &b1).expect("4x4")).expect("same dim");
    op.add_scaled(-1.0, &kron(&a2, &b2).expect("4x4")).expect("same dim");
    op
}

fn operator_from_zx(angles: &[f64]) -> Result<Operator> {
    let m = |t: f64| MeasurementAngles::zx(t);
    Ok(chsh_operator(m(angles[0])?, m(angles[1])?, m(angles[2])?, m(angles[3])?))
}

/// CHSH value of an action `[a1, a2, b1, b2, (state angles…)]` with all
/// measurements in the z–x plane.
pub fn chsh_reward(action: &[f64], mode: RewardMode, fixed_state: Option<&StateVector>) -> Result<f64> {
    let expected = match mode {
        RewardMode::FixedState | RewardMode::ExactDiag => 4,
        RewardMode::FullRL => 7,
        RewardMode::Ansatz => return arg_err("variational CHSH rewards need a circuit depth; use ChshEnv"),
    };
    if action.len() != expected {
        return arg_err(format!("CHSH in {mode} mode takes {expected} angles, got {}", action.len()));
    }
    let op = operator_from_zx(&action[..4])?;
    match mode {
        RewardMode::FixedState => {
            let psi = fixed_state.ok_or_else(|| crate::Error::Argument("fixed-state mode needs a state".into()))?;
            expectation(&op, psi)
        }
        RewardMode::ExactDiag => extreme_eigenvalue(&op, Which::Max),
        RewardMode::FullRL => expectation(&op, &hyperspherical_state(&action[4..], 2)?),
        RewardMode::Ansatz => unreachable!(),
    }
}

/// Two parties, two settings, two outcomes.
#[derive(Debug, Clone)]
pub struct ChshEnv {
    spec: EnvironmentSpec,
    fixed_state: StateVector,
    layers: usize,
}

impl ChshEnv {
    /// Fixed-state mode uses `(|00⟩ + |11⟩)/√2`.
    pub fn new(mode: RewardMode, layers: usize) -> Result<Self> {
        Self::with_state(mode, layers, StateVector::phi_plus())
    }

    pub fn with_state(mode: RewardMode, layers: usize, fixed_state: StateVector) -> Result<Self> {
        if fixed_state.n_qubits() != 2 {
            return arg_err("CHSH state must have two qubits");
        }
        let mut bounds = Vec::new();
        if mode == RewardMode::Ansatz {
            bounds.extend(std::iter::repeat(ANSATZ_BOUNDS).take(CircuitParams::count(2, layers)));
        }
        bounds.extend(std::iter::repeat(MEASUREMENT_BOUNDS).take(4));
        if mode == RewardMode::FullRL {
            bounds.extend(hyperspherical_bounds(2));
        }
        let spec = EnvironmentSpec {
            scenario: BellScenario { n_parties: 2, settings_per_party: 2, outcomes: 2 },
            mode,
            n_qubits: 2,
            action_dimension: bounds.len(),
            action_bounds: bounds,
            classical_bound: 2.0,
            quantum_bound: Some(2.0 * SQRT_2),
        };
        spec.validate()?;
        Ok(Self { spec, fixed_state, layers })
    }

    fn circuit(&self, action: &[f64]) -> Result<CircuitParams> {
        CircuitParams::new(2, self.layers, action[..CircuitParams::count(2, self.layers)].to_vec())
    }
}

impl BellEnvironment for ChshEnv {
    fn name(&self) -> &'static str {
        "chsh"
    }

    fn spec(&self) -> &EnvironmentSpec {
        &self.spec
    }

    fn reward(&self, action: &[f64]) -> Result<f64> {
        self.spec.check_action(action)?;
        match self.spec.mode {
            RewardMode::Ansatz => {
                let k = CircuitParams::count(2, self.layers);
                let psi = build_state(&self.circuit(action)?)?;
                expectation(&operator_from_zx(&action[k..])?, &psi)
            }
            mode => chsh_reward(action, mode, Some(&self.fixed_state)),
        }
    }

    fn ansatz_angles(&self, action: &[f64]) -> Option<Vec<Vec<f64>>> {
        (self.spec.mode == RewardMode::Ansatz).then(|| self.circuit(action).ok().map(|c| c.rows())).flatten()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::extreme_eigenpair;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    const OPT: [f64; 4] = [0.0, FRAC_PI_2, FRAC_PI_4, -FRAC_PI_4];

    #[test]
    fn zero_angles_collapse_to_twice_zz() {
        let z = MeasurementAngles::zx(0.0).unwrap();
        let op = chsh_operator(z, z, z, z);
        let zz = kron(&Operator::pauli_z(), &Operator::pauli_z()).unwrap().scale(2.0);
        assert!(op.max_abs_diff(&zz) < 1e-15);
        let r = chsh_reward(&[0.0; 4], RewardMode::FixedState, Some(&StateVector::phi_plus())).unwrap();
        assert!((r - 2.0).abs() < 1e-12);
    }

    #[test]
    fn optimal_angles_reach_tsirelson() {
        let op = operator_from_zx(&OPT).unwrap();
        let pair = extreme_eigenpair(&op, Which::Max).unwrap();
        assert!((pair.value - 2.0 * SQRT_2).abs() < 1e-12);
        assert!(pair.residual < 1e-10);
        let r = chsh_reward(&OPT, RewardMode::ExactDiag, None).unwrap();
        assert!((r - 2.0 * SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn full_mode_with_bell_pair_angles() {
        // Hyperspherical angles of (|00> + |11>)/sqrt 2: (π/4, π/2, π/2).
        let mut action = OPT.to_vec();
        action.extend([FRAC_PI_4, FRAC_PI_2, FRAC_PI_2]);
        let r = chsh_reward(&action, RewardMode::FullRL, None).unwrap();
        assert!((r - 2.0 * SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn fixed_mode_requires_state() {
        assert!(chsh_reward(&OPT, RewardMode::FixedState, None).is_err());
        assert!(chsh_reward(&OPT[..3], RewardMode::ExactDiag, None).is_err());
    }

    #[test]
    fn tsirelson_bound_holds_for_random_settings() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..10_000 {
            let m = |rng: &mut ChaCha8Rng| {
                MeasurementAngles::new(rng.gen_range(0.0..PI), rng.gen_range(0.0..2.0 * PI)).unwrap()
            };
            let op = chsh_operator(m(&mut rng), m(&mut rng), m(&mut rng), m(&mut rng));
            assert!(extreme_eigenvalue(&op, Which::Max).unwrap() <= 2.0 * SQRT_2 + 1e-9);
        }
    }

    #[test]
    fn env_dimensions_per_mode() {
        assert_eq!(ChshEnv::new(RewardMode::ExactDiag, 0).unwrap().spec().action_dimension, 4);
        assert_eq!(ChshEnv::new(RewardMode::FullRL, 0).unwrap().spec().action_dimension, 7);
        let env = ChshEnv::new(RewardMode::Ansatz, 1).unwrap();
        assert_eq!(env.spec().action_dimension, 8);
        let a = vec![0.0; 8];
        assert_eq!(env.ansatz_angles(&a).unwrap(), vec![vec![0.0, 0.0]; 2]);
    }
}
