//! Tripartite bilocality: Alice and Charlie each hold one qubit of two
//! independent sources, Bob holds the other two. Register order is
//! `[A, B₁, B₂, C]` with source 1 on `(A, B₁)` and source 2 on `(B₂, C)`.

use std::f64::consts::SQRT_2;

use super::{hyperspherical_bounds, BellEnvironment, BellScenario, EnvironmentSpec, RewardMode, MEASUREMENT_BOUNDS};
use crate::error::{arg_err, Error, Result};
use crate::qsim::{dichotomic_observable, hyperspherical_state, kron, MeasurementAngles, Operator, StateVector, C64};

/// Bob's two fixed observables on his qubit pair.
#[derive(Debug, Clone)]
pub struct BobSettings {
    pub b0: Operator,
    pub b1: Operator,
}

impl Default for BobSettings {
    /// `B₀ = σz⊗σz`, `B₁ = σx⊗σx`.
    fn default() -> Self {
        Self {
            b0: kron(&Operator::pauli_z(), &Operator::pauli_z()).expect("4x4"),
            b1: kron(&Operator::pauli_x(), &Operator::pauli_x()).expect("4x4"),
        }
    }
}

/// The two correlator combinations and the bilocal figure of merit
/// `S = √|I| + √|J|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BilocalityValue {
    pub i: f64,
    pub j: f64,
    pub s: f64,
}

impl BilocalityValue {
    pub fn new(i: f64, j: f64) -> Self {
        Self { i, j, s: i.abs().sqrt() + j.abs().sqrt() }
    }
}

/// Bilocality value with Bob's default settings.
pub fn bilocality_value(
    alice: [MeasurementAngles; 2],
    charlie: [MeasurementAngles; 2],
    source1: &StateVector,
    source2: &StateVector,
) -> Result<BilocalityValue> {
    bilocality_value_with(&BobSettings::default(), alice, charlie, source1, source2)
}

/// `I = ¼ Σ_{x,z} ⟨A_x B₀ C_z⟩`, `J = ¼ Σ_{x,z} (−1)^{x+z} ⟨A_x B₁ C_z⟩`.
pub fn bilocality_value_with(
    bob: &BobSettings,
    alice: [MeasurementAngles; 2],
    charlie: [MeasurementAngles; 2],
    source1: &StateVector,
    source2: &StateVector,
) -> Result<BilocalityValue> {
    if source1.n_qubits() != 2 || source2.n_qubits() != 2 {
        return arg_err("each bilocality source must be a two-qubit state");
    }
    if bob.b0.dim() != 4 || bob.b1.dim() != 4 || !bob.b0.is_hermitian() || !bob.b1.is_hermitian() {
        return arg_err("Bob's observables must be Hermitian 4x4 operators");
    }
    let psi = source1.tensor(source2)?;
    let a = alice.map(dichotomic_observable);
    let c = charlie.map(dichotomic_observable);

    // Bob's observable applied once per setting; Alice and Charlie act on
    // the outer qubits, so ⟨A_x B_y C_z⟩ = ⟨A_x C_z ψ | B_y ψ⟩.
    let bob_images = [apply_bob(&bob.b0, psi.amplitudes()), apply_bob(&bob.b1, psi.amplitudes())];
    let mut sums = [0.0; 2];
    for (x, ax) in a.iter().enumerate() {
        for (z, cz) in c.iter().enumerate() {
            let outer = apply_outer(ax, cz, psi.amplitudes());
            for (y, image) in bob_images.iter().enumerate() {
                let v: C64 = outer.iter().zip(image).map(|(l, r)| l.conj() * r).sum();
                if v.im.abs() > 1e-10 {
                    return Err(Error::Numerical(format!("tripartite correlator has imaginary part {:e}", v.im)));
                }
                let sign = if y == 1 && (x + z) % 2 == 1 { -1.0 } else { 1.0 };
                sums[y] += sign * v.re;
            }
        }
    }
    Ok(BilocalityValue::new(sums[0] / 4.0, sums[1] / 4.0))
}

fn apply_bob(b: &Operator, psi: &[C64]) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); 16];
    for a in 0..2 {
        for c in 0..2 {
            for row in 0..4 {
                let mut acc = C64::new(0.0, 0.0);
                for col in 0..4 {
                    acc += b.get(row, col) * psi[(a << 3) | (col << 1) | c];
                }
                out[(a << 3) | (row << 1) | c] = acc;
            }
        }
    }
    out
}

fn apply_outer(a: &Operator, c: &Operator, psi: &[C64]) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); 16];
    for mid in 0..4 {
        for ra in 0..2 {
            for rc in 0..2 {
                let mut acc = C64::new(0.0, 0.0);
                for ca in 0..2 {
                    for cc in 0..2 {
                        acc += a.get(ra, ca) * c.get(rc, cc) * psi[(ca << 3) | (mid << 1) | cc];
                    }
                }
                out[(ra << 3) | (mid << 1) | rc] = acc;
            }
        }
    }
    out
}

/// Bilocality with Bob fixed; the agent picks Alice's and Charlie's angles
/// and, in full mode, both source states.
#[derive(Debug, Clone)]
pub struct BilocalEnv {
    spec: EnvironmentSpec,
    bob: BobSettings,
    sources: (StateVector, StateVector),
}

impl BilocalEnv {
    pub fn new(mode: RewardMode) -> Result<Self> {
        Self::with_bob(mode, BobSettings::default())
    }

    pub fn with_bob(mode: RewardMode, bob: BobSettings) -> Result<Self> {
        let mut bounds = vec![MEASUREMENT_BOUNDS; 4];
        match mode {
            RewardMode::FixedState => {}
            RewardMode::FullRL => {
                bounds.extend(hyperspherical_bounds(2));
                bounds.extend(hyperspherical_bounds(2));
            }
            other => return Err(Error::Config(format!("bilocal environment does not support {other} mode"))),
        }
        let spec = EnvironmentSpec {
            scenario: BellScenario { n_parties: 3, settings_per_party: 2, outcomes: 2 },
            mode,
            n_qubits: 4,
            action_dimension: bounds.len(),
            action_bounds: bounds,
            classical_bound: 1.0,
            quantum_bound: Some(SQRT_2),
        };
        spec.validate()?;
        Ok(Self { spec, bob, sources: (StateVector::phi_plus(), StateVector::phi_plus()) })
    }

    /// Full breakdown of an action.
    pub fn evaluate(&self, action: &[f64]) -> Result<BilocalityValue> {
        self.spec.check_action(action)?;
        let m = |t: f64| MeasurementAngles::zx(t);
        let alice = [m(action[0])?, m(action[1])?];
        let charlie = [m(action[2])?, m(action[3])?];
        match self.spec.mode {
            RewardMode::FullRL => {
                let s1 = hyperspherical_state(&action[4..7], 2)?;
                let s2 = hyperspherical_state(&action[7..10], 2)?;
                bilocality_value_with(&self.bob, alice, charlie, &s1, &s2)
            }
            _ => bilocality_value_with(&self.bob, alice, charlie, &self.sources.0, &self.sources.1),
        }
    }
}

impl BellEnvironment for BilocalEnv {
    fn name(&self) -> &'static str {
        "bilocal"
    }

    fn spec(&self) -> &EnvironmentSpec {
        &self.spec
    }

    fn reward(&self, action: &[f64]) -> Result<f64> {
        Ok(self.evaluate(action)?.s)
    }
}
