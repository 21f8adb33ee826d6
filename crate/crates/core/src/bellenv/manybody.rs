//! Permutation-symmetric many-body Bell inequalities built from one- and
//! two-body symmetrized correlators
//!
//! ```text
//! S_k  = Σ_i ⟨M_k^(i)⟩
//! S_kl = Σ_{i≠j} ⟨M_k^(i) M_l^(j)⟩
//! ```
//!
//! Both inequalities handled here are floor-type (`L ≥ bound` classically),
//! so rewards are the violation magnitude `−(L − bound)`.

use serde::{Deserialize, Serialize};

use super::{hyperspherical_bounds, BellEnvironment, BellScenario, EnvironmentSpec, RewardMode};
use super::{ANSATZ_BOUNDS, MEASUREMENT_BOUNDS};
use crate::ansatz::{build_state, CircuitParams};
use crate::error::{arg_err, Error, Result};
use crate::qsim::{
    dichotomic_observable, extreme_eigenvalue, hyperspherical_state, kron, LocalSum, MeasurementAngles, Operator,
    StateVector, Which, C64,
};
use crate::qsim::apply_gate;

/// Measurement directions for the two settings, shared by every site or
/// chosen per site.
#[derive(Debug, Clone, PartialEq)]
pub enum SiteAngles {
    Shared([MeasurementAngles; 2]),
    PerSite(Vec<[MeasurementAngles; 2]>),
}

impl SiteAngles {
    fn observables(&self, n: usize) -> Result<Vec<[Operator; 2]>> {
        match self {
            SiteAngles::Shared(pair) => Ok(vec![pair.map(dichotomic_observable); n]),
            SiteAngles::PerSite(v) if v.len() == n => Ok(v.iter().map(|p| p.map(dichotomic_observable)).collect()),
            SiteAngles::PerSite(v) => arg_err(format!("{} per-site angle pairs for {n} sites", v.len())),
        }
    }
}

/// One- and two-body symmetrized correlators.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SymmetrizedCorrelators {
    pub s0: f64,
    pub s1: f64,
    pub s00: f64,
    pub s01: f64,
    pub s11: f64,
}

/// Correlators with one angle pair used on every site.
pub fn symmetrized_correlators(
    psi: &StateVector,
    theta0: MeasurementAngles,
    theta1: MeasurementAngles,
    n: usize,
) -> Result<SymmetrizedCorrelators> {
    correlators(psi, &SiteAngles::Shared([theta0, theta1]), n)
}

pub fn symmetrized_correlators_per_site(
    psi: &StateVector,
    angles: &[[MeasurementAngles; 2]],
    n: usize,
) -> Result<SymmetrizedCorrelators> {
    correlators(psi, &SiteAngles::PerSite(angles.to_vec()), n)
}

fn correlators(psi: &StateVector, angles: &SiteAngles, n: usize) -> Result<SymmetrizedCorrelators> {
    if psi.n_qubits() != n {
        return arg_err(format!("state has {} qubits, expected {n}", psi.n_qubits()));
    }
    let obs = angles.observables(n)?;
    // images[k][i] = M_k^(i) |ψ⟩; since the M are Hermitian,
    // ⟨M_k^(i) M_l^(j)⟩ = ⟨M_k^(i) ψ | M_l^(j) ψ⟩.
    let mut images: [Vec<Vec<C64>>; 2] = [Vec::with_capacity(n), Vec::with_capacity(n)];
    for (i, pair) in obs.iter().enumerate() {
        for k in 0..2 {
            let out = apply_gate(&pair[k], &[i], psi)?;
            images[k].push(out.amplitudes().to_vec());
        }
    }
    let inner = |a: &[C64], b: &[C64]| -> C64 { a.iter().zip(b).map(|(x, y)| x.conj() * y).sum() };
    let amps = psi.amplitudes();
    let mut c = SymmetrizedCorrelators::default();
    for i in 0..n {
        c.s0 += inner(amps, &images[0][i]).re;
        c.s1 += inner(amps, &images[1][i]).re;
        for j in 0..n {
            if i == j {
                continue;
            }
            c.s00 += inner(&images[0][i], &images[0][j]).re;
            c.s01 += inner(&images[0][i], &images[1][j]).re;
            c.s11 += inner(&images[1][i], &images[1][j]).re;
        }
    }
    Ok(c)
}

/// `L = s0·S0 + s1·S1 + s00·S00 + s01·S01 + s11·S11 + constant`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellForm {
    pub s0: f64,
    pub s1: f64,
    pub s00: f64,
    pub s01: f64,
    pub s11: f64,
    pub constant: f64,
}

impl BellForm {
    pub fn evaluate(&self, c: &SymmetrizedCorrelators) -> f64 {
        self.s0 * c.s0 + self.s1 * c.s1 + self.s00 * c.s00 + self.s01 * c.s01 + self.s11 * c.s11 + self.constant
    }
}

/// Operator whose expectation is `form.evaluate(correlators)`.
///
/// Ordered pairs `(i, j)` and `(j, i)` of `S_kl` are merged per unordered
/// pair: `S00 → 2 M0⊗M0`, `S11 → 2 M1⊗M1`, `S01 → M0⊗M1 + M1⊗M0`.
pub fn symmetric_bell_operator(form: &BellForm, angles: &SiteAngles, n: usize) -> Result<LocalSum> {
    let obs = angles.observables(n)?;
    let mut op = LocalSum::new(n)?;
    for (i, [m0, m1]) in obs.iter().enumerate() {
        op.push(form.s0, &[i], m0)?;
        op.push(form.s1, &[i], m1)?;
    }
    for i in 0..n {
        for j in i + 1..n {
            let ([a0, a1], [b0, b1]) = (&obs[i], &obs[j]);
            let mut pair = kron(a0, b0)?.scale(2.0 * form.s00);
            pair.add_scaled(2.0 * form.s11, &kron(a1, b1)?)?;
            pair.add_scaled(form.s01, &kron(a0, b1)?)?;
            pair.add_scaled(form.s01, &kron(a1, b0)?)?;
            op.push(1.0, &[i, j], &pair)?;
        }
    }
    op.push_constant(form.constant);
    Ok(op)
}

/// Coefficients of the Dicke-state inequality
/// `αS0 + βS1 + (γ/2)S00 + δS01 + (ε/2)S11 ≥ −β_C`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DickeCoefficients {
    pub n: usize,
    pub c_n: usize,
    pub f_n: usize,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub beta_c: f64,
}

pub fn dicke_coefficients(n: usize) -> Result<DickeCoefficients> {
    if n < 2 {
        return arg_err(format!("Dicke inequality needs at least 2 parties, got {n}"));
    }
    let c_n = n / 2; // ceil((n - 1) / 2)
    let f_n = (n - 1) / 2;
    let nf = n as f64;
    let alpha = nf * (nf - 1.0) * (c_n as f64 - nf / 2.0);
    Ok(DickeCoefficients {
        n,
        c_n,
        f_n,
        alpha,
        beta: alpha / nf,
        gamma: nf * (nf - 1.0) / 2.0,
        delta: nf / 2.0,
        epsilon: -1.0,
        beta_c: nf * (nf - 1.0) * c_n as f64 / 2.0,
    })
}

/// Which many-body inequality an environment scores.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Inequality {
    /// `−2S0 + ½S00 − S01 + ½S11 + 2N ≥ 0`.
    Mbi,
    Dicke(DickeCoefficients),
}

impl Inequality {
    /// Form whose value is nonnegative for every local model.
    pub fn form(&self, n: usize) -> BellForm {
        match self {
            Inequality::Mbi => {
                BellForm { s0: -2.0, s1: 0.0, s00: 0.5, s01: -1.0, s11: 0.5, constant: 2.0 * n as f64 }
            }
            Inequality::Dicke(c) => BellForm {
                s0: c.alpha,
                s1: c.beta,
                s00: c.gamma / 2.0,
                s01: c.delta,
                s11: c.epsilon / 2.0,
                constant: c.beta_c,
            },
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Inequality::Mbi => "mbi",
            Inequality::Dicke(_) => "dicke",
        }
    }
}

fn shared(theta0: f64, theta1: f64) -> Result<SiteAngles> {
    Ok(SiteAngles::Shared([MeasurementAngles::zx(theta0)?, MeasurementAngles::zx(theta1)?]))
}

/// Violation of the many-body inequality for `[θ0, θ1, (state angles…)]`.
///
/// Exact-diagonalization mode returns `−λ_min` of the Bell operator
/// (constant included); full mode returns `−L(ψ)` on the hyperspherical
/// state.
pub fn mbi_reward(action: &[f64], mode: RewardMode, n: usize) -> Result<f64> {
    if n < 2 {
        return arg_err("many-body inequality needs at least two qubits");
    }
    let form = Inequality::Mbi.form(n);
    match mode {
        RewardMode::ExactDiag if action.len() == 2 => {
            let op = symmetric_bell_operator(&form, &shared(action[0], action[1])?, n)?;
            Ok(-extreme_eigenvalue(&op, Which::Min)?)
        }
        RewardMode::FullRL if action.len() == 2 + (1 << n) - 1 => {
            let psi = hyperspherical_state(&action[2..], n)?;
            let c = correlators(&psi, &shared(action[0], action[1])?, n)?;
            Ok(-form.evaluate(&c))
        }
        RewardMode::ExactDiag | RewardMode::FullRL => arg_err(format!("wrong action length {} for {mode} mode", action.len())),
        other => arg_err(format!("mbi_reward does not handle {other} mode")),
    }
}

/// `−(L + β_C)` for the Dicke inequality; positive means violation.
pub fn dicke_reward(
    psi: &StateVector,
    theta0: MeasurementAngles,
    theta1: MeasurementAngles,
    coeffs: &DickeCoefficients,
) -> Result<f64> {
    if psi.n_qubits() != coeffs.n {
        return arg_err(format!("state has {} qubits, coefficients are for {}", psi.n_qubits(), coeffs.n));
    }
    let c = symmetrized_correlators(psi, theta0, theta1, coeffs.n)?;
    Ok(-Inequality::Dicke(*coeffs).form(coeffs.n).evaluate(&c))
}

/// Many-body inequality environment (`mbi` or `dicke`).
///
/// Action layout: variational angles first (ansatz mode, row-major by
/// layer), then measurement angles (`θ0, θ1`, or all `θ0` followed by all
/// `θ1` in per-site mode), then hyperspherical state angles (full mode).
#[derive(Debug, Clone)]
pub struct ManyBodyEnv {
    inequality: Inequality,
    spec: EnvironmentSpec,
    layers: usize,
    per_site: bool,
}

impl ManyBodyEnv {
    pub fn new(inequality: Inequality, mode: RewardMode, n: usize, layers: usize, per_site: bool) -> Result<Self> {
        if n < 2 {
            return arg_err("many-body inequalities need at least two qubits");
        }
        if let Inequality::Dicke(c) = inequality {
            if c.n != n {
                return arg_err("Dicke coefficients do not match the qubit count");
            }
        }
        let n_meas = if per_site { 2 * n } else { 2 };
        let mut bounds = Vec::new();
        match mode {
            RewardMode::ExactDiag => bounds.extend(vec![MEASUREMENT_BOUNDS; n_meas]),
            RewardMode::FullRL => {
                bounds.extend(vec![MEASUREMENT_BOUNDS; n_meas]);
                bounds.extend(hyperspherical_bounds(n));
            }
            RewardMode::Ansatz => {
                bounds.extend(vec![ANSATZ_BOUNDS; CircuitParams::count(n, layers)]);
                bounds.extend(vec![MEASUREMENT_BOUNDS; n_meas]);
            }
            RewardMode::FixedState => {
                return Err(Error::Config(format!("{} environment does not support fixed mode", inequality.name())))
            }
        }
        let spec = EnvironmentSpec {
            scenario: BellScenario { n_parties: n, settings_per_party: 2, outcomes: 2 },
            mode,
            n_qubits: n,
            action_dimension: bounds.len(),
            action_bounds: bounds,
            classical_bound: 0.0,
            quantum_bound: None,
        };
        spec.validate()?;
        Ok(Self { inequality, spec, layers, per_site })
    }

    pub fn inequality(&self) -> Inequality {
        self.inequality
    }

    fn n(&self) -> usize {
        self.spec.n_qubits
    }

    fn circuit_len(&self) -> usize {
        if self.spec.mode == RewardMode::Ansatz {
            CircuitParams::count(self.n(), self.layers)
        } else {
            0
        }
    }

    fn angles(&self, meas: &[f64]) -> Result<SiteAngles> {
        if self.per_site {
            let n = self.n();
            let pairs = (0..n)
                .map(|i| Ok([MeasurementAngles::zx(meas[i])?, MeasurementAngles::zx(meas[n + i])?]))
                .collect::<Result<Vec<_>>>()?;
            Ok(SiteAngles::PerSite(pairs))
        } else {
            shared(meas[0], meas[1])
        }
    }

    /// Measurement settings encoded in an action.
    pub fn site_angles(&self, action: &[f64]) -> Result<SiteAngles> {
        self.spec.check_action(action)?;
        let start = self.circuit_len();
        let n_meas = if self.per_site { 2 * self.n() } else { 2 };
        self.angles(&action[start..start + n_meas])
    }

    /// The Bell operator (constant included) for the settings in `action`.
    pub fn bell_operator(&self, action: &[f64]) -> Result<LocalSum> {
        symmetric_bell_operator(&self.inequality.form(self.n()), &self.site_angles(action)?, self.n())
    }

    /// Quantum state encoded in an action (full and ansatz modes).
    pub fn state(&self, action: &[f64]) -> Result<Option<StateVector>> {
        self.spec.check_action(action)?;
        let n = self.n();
        Ok(match self.spec.mode {
            RewardMode::FullRL => {
                let n_meas = if self.per_site { 2 * n } else { 2 };
                Some(hyperspherical_state(&action[n_meas..], n)?)
            }
            RewardMode::Ansatz => {
                let params = CircuitParams::new(n, self.layers, action[..self.circuit_len()].to_vec())?;
                Some(build_state(&params)?)
            }
            _ => None,
        })
    }
}

impl BellEnvironment for ManyBodyEnv {
    fn name(&self) -> &'static str {
        self.inequality.name()
    }

    fn spec(&self) -> &EnvironmentSpec {
        &self.spec
    }

    fn reward(&self, action: &[f64]) -> Result<f64> {
        let angles = self.site_angles(action)?;
        let form = self.inequality.form(self.n());
        match self.state(action)? {
            None => {
                let op = symmetric_bell_operator(&form, &angles, self.n())?;
                Ok(-extreme_eigenvalue(&op, Which::Min)?)
            }
            Some(psi) => Ok(-form.evaluate(&correlators(&psi, &angles, self.n())?)),
        }
    }

    fn ansatz_angles(&self, action: &[f64]) -> Option<Vec<Vec<f64>>> {
        if self.spec.mode != RewardMode::Ansatz || action.len() != self.spec.action_dimension {
            return None;
        }
        CircuitParams::new(self.n(), self.layers, action[..self.circuit_len()].to_vec()).ok().map(|c| c.rows())
    }
}
