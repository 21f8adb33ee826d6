//! Two-player non-local games and behaviours.
//!
//! Outcome index 0 stands for the `+1` outcome and index 1 for `−1`.

use crate::error::{arg_err, Result};
use crate::qsim::{kron, Operator, StateVector};

/// Question distribution `π(x, y)` and winning predicate `V(a, b, x, y)`.
#[derive(Debug, Clone)]
pub struct BellGame {
    n_x: usize,
    n_y: usize,
    n_a: usize,
    n_b: usize,
    pi: Vec<f64>,
    predicate: Vec<bool>,
}

impl BellGame {
    /// `pi` is indexed `[x][y]`, `predicate` `[x][y][a][b]`, both flattened.
    pub fn new(n_x: usize, n_y: usize, n_a: usize, n_b: usize, pi: Vec<f64>, predicate: Vec<bool>) -> Result<Self> {
        if pi.len() != n_x * n_y || predicate.len() != n_x * n_y * n_a * n_b {
            return arg_err("game tables do not match the declared shape");
        }
        if pi.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return arg_err("question probabilities must be nonnegative");
        }
        let total: f64 = pi.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return arg_err(format!("question probabilities sum to {total}"));
        }
        Ok(Self { n_x, n_y, n_a, n_b, pi, predicate })
    }

    /// Uniform questions, win iff `a ⊕ b = x ∧ y`.
    pub fn chsh() -> Self {
        let mut predicate = Vec::with_capacity(16);
        for x in 0..2 {
            for y in 0..2 {
                for a in 0..2 {
                    for b in 0..2 {
                        predicate.push((a ^ b) == (x & y));
                    }
                }
            }
        }
        Self::new(2, 2, 2, 2, vec![0.25; 4], predicate).expect("valid CHSH game")
    }

    pub fn shape(&self) -> (usize, usize, usize, usize) {
        (self.n_x, self.n_y, self.n_a, self.n_b)
    }
}

/// Conditional distribution `p(a, b | x, y)`, indexed `[x][y][a][b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Behaviour {
    n_x: usize,
    n_y: usize,
    n_a: usize,
    n_b: usize,
    p: Vec<f64>,
}

impl Behaviour {
    pub fn new(n_x: usize, n_y: usize, n_a: usize, n_b: usize, p: Vec<f64>) -> Result<Self> {
        if p.len() != n_x * n_y * n_a * n_b {
            return arg_err("behaviour table does not match the declared shape");
        }
        let slice = n_a * n_b;
        for (k, chunk) in p.chunks(slice).enumerate() {
            if chunk.iter().any(|&v| v < -1e-12 || !v.is_finite()) {
                return arg_err(format!("negative probability in slice {k}"));
            }
            let total: f64 = chunk.iter().sum();
            if (total - 1.0).abs() > 1e-10 {
                return arg_err(format!("slice (x, y) = ({}, {}) sums to {total}", k / n_y, k % n_y));
            }
        }
        Ok(Self { n_x, n_y, n_a, n_b, p })
    }

    /// Behaviour of a deterministic strategy: `alice[x]` and `bob[y]` are
    /// outcome indices.
    pub fn deterministic(alice: &[usize], bob: &[usize], n_a: usize, n_b: usize) -> Result<Self> {
        let (n_x, n_y) = (alice.len(), bob.len());
        let mut p = vec![0.0; n_x * n_y * n_a * n_b];
        for (x, &a) in alice.iter().enumerate() {
            for (y, &b) in bob.iter().enumerate() {
                if a >= n_a || b >= n_b {
                    return arg_err("deterministic outcome out of range");
                }
                p[((x * n_y + y) * n_a + a) * n_b + b] = 1.0;
            }
        }
        Self::new(n_x, n_y, n_a, n_b, p)
    }

    pub fn prob(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.p[((x * self.n_y + y) * self.n_a + a) * self.n_b + b]
    }

    pub fn shape(&self) -> (usize, usize, usize, usize) {
        (self.n_x, self.n_y, self.n_a, self.n_b)
    }

    /// `⟨a_x b_y⟩ = Σ ab p(a, b | x, y)` for two-outcome settings.
    pub fn correlator(&self, x: usize, y: usize) -> f64 {
        let sign = |i: usize| if i == 0 { 1.0 } else { -1.0 };
        let mut e = 0.0;
        for a in 0..self.n_a.min(2) {
            for b in 0..self.n_b.min(2) {
                e += sign(a) * sign(b) * self.prob(a, b, x, y);
            }
        }
        e
    }
}

/// `Σ_{x,y} π(x,y) Σ_{a,b} V(a,b|x,y) p(a,b|x,y)`.
pub fn winning_probability(game: &BellGame, behaviour: &Behaviour) -> Result<f64> {
    if game.shape() != behaviour.shape() {
        return arg_err(format!("game shape {:?} differs from behaviour shape {:?}", game.shape(), behaviour.shape()));
    }
    let (n_x, n_y, n_a, n_b) = game.shape();
    let mut total = 0.0;
    for x in 0..n_x {
        for y in 0..n_y {
            let mut inner = 0.0;
            for a in 0..n_a {
                for b in 0..n_b {
                    if game.predicate[((x * n_y + y) * n_a + a) * n_b + b] {
                        inner += behaviour.prob(a, b, x, y);
                    }
                }
            }
            total += game.pi[x * n_y + y] * inner;
        }
    }
    Ok(total)
}

/// `p(a, b | x, y) = ⟨ψ| Π_x^a ⊗ Π_y^b |ψ⟩` with `Π^± = (I ± O)/2`.
pub fn behaviour_from_quantum(alice: &[Operator], bob: &[Operator], psi: &StateVector) -> Result<Behaviour> {
    if alice.is_empty() || bob.is_empty() {
        return arg_err("each party needs at least one observable");
    }
    let (da, db) = (alice[0].dim(), bob[0].dim());
    if alice.iter().any(|o| o.dim() != da) || bob.iter().any(|o| o.dim() != db) {
        return arg_err("observables of one party must share a dimension");
    }
    if da * db != psi.dim() {
        return arg_err("observable dimensions do not match the state");
    }
    let projectors = |obs: &Operator| -> Result<[Operator; 2]> {
        if !obs.is_hermitian() || !obs.matmul(obs)?.max_abs_diff(&Operator::identity(obs.dim())).le(&1e-10) {
            return arg_err("observables must be Hermitian with eigenvalues ±1");
        }
        let id = Operator::identity(obs.dim());
        Ok([id.add(obs)?.scale(0.5), id.sub(obs)?.scale(0.5)])
    };
    let pa = alice.iter().map(projectors).collect::<Result<Vec<_>>>()?;
    let pb = bob.iter().map(projectors).collect::<Result<Vec<_>>>()?;
    let (n_x, n_y) = (alice.len(), bob.len());
    let mut p = Vec::with_capacity(n_x * n_y * 4);
    for px in &pa {
        for py in &pb {
            for proj_a in px {
                for proj_b in py {
                    let op = kron(proj_a, proj_b)?;
                    let v = op.mul_vec(psi.amplitudes())?;
                    let e: f64 = psi.amplitudes().iter().zip(&v).map(|(l, r)| (l.conj() * r).re).sum();
                    p.push(e.max(0.0));
                }
            }
        }
    }
    Behaviour::new(n_x, n_y, 2, 2, p)
}

/// CHSH expression for a deterministic `±1` assignment.
pub fn chsh_deterministic_value(a1: i8, a2: i8, b1: i8, b2: i8) -> i32 {
    let (a1, a2, b1, b2) = (a1 as i32, a2 as i32, b1 as i32, b2 as i32);
    a1 * b1 + a1 * b2 + a2 * b1 - a2 * b2
}

/// Maximum of the CHSH expression over the 16 deterministic strategies.
pub fn classical_bound_chsh() -> f64 {
    let signs = [1i8, -1];
    let mut best = i32::MIN;
    for a1 in signs {
        for a2 in signs {
            for b1 in signs {
                for b2 in signs {
                    best = best.max(chsh_deterministic_value(a1, a2, b1, b2));
                }
            }
        }
    }
    best as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bellenv::chsh_operator;
    use crate::qsim::{dichotomic_observable, expectation, hyperspherical_state, MeasurementAngles};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, SQRT_2};

    fn zx(t: f64) -> MeasurementAngles {
        MeasurementAngles::zx(t).unwrap()
    }

    #[test]
    fn classical_chsh_bound_by_enumeration() {
        assert_eq!(classical_bound_chsh(), 2.0);
        assert_eq!(chsh_deterministic_value(1, 1, 1, 1), 2);
        assert_eq!(chsh_deterministic_value(1, 1, 1, -1), 2);
    }

    #[test]
    fn trivially_winnable_game() {
        let game = BellGame::new(2, 2, 2, 2, vec![0.25; 4], vec![true; 16]).unwrap();
        let b = Behaviour::deterministic(&[0, 1], &[1, 1], 2, 2).unwrap();
        assert_eq!(winning_probability(&game, &b).unwrap(), 1.0);
    }

    #[test]
    fn best_deterministic_chsh_strategy_wins_three_quarters() {
        let game = BellGame::chsh();
        let mut best: f64 = 0.0;
        for s in 0..16usize {
            let b = Behaviour::deterministic(&[s & 1, (s >> 1) & 1], &[(s >> 2) & 1, (s >> 3) & 1], 2, 2).unwrap();
            best = best.max(winning_probability(&game, &b).unwrap());
        }
        assert_eq!(best, 0.75);
    }

    #[test]
    fn optimal_quantum_behaviour() {
        let alice = [dichotomic_observable(zx(0.0)), dichotomic_observable(zx(FRAC_PI_2))];
        let bob = [dichotomic_observable(zx(FRAC_PI_4)), dichotomic_observable(zx(-FRAC_PI_4))];
        let psi = StateVector::phi_plus();
        let b = behaviour_from_quantum(&alice, &bob, &psi).unwrap();
        let p = winning_probability(&BellGame::chsh(), &b).unwrap();
        assert!((p - (0.5 + 2.0 * SQRT_2 / 8.0)).abs() < 1e-12);
        let value = expectation(&chsh_operator(zx(0.0), zx(FRAC_PI_2), zx(FRAC_PI_4), zx(-FRAC_PI_4)), &psi).unwrap();
        assert!((p - (0.5 + value / 8.0)).abs() < 1e-12);
    }

    #[test]
    fn perfect_correlations() {
        let z = [Operator::pauli_z()];
        let b = behaviour_from_quantum(&z, &z, &StateVector::zero(2).unwrap()).unwrap();
        assert!((b.prob(0, 0, 0, 0) - 1.0).abs() < 1e-15);
        let b = behaviour_from_quantum(&z, &z, &StateVector::phi_plus()).unwrap();
        assert!((b.prob(0, 0, 0, 0) - 0.5).abs() < 1e-15);
        assert!((b.prob(1, 1, 0, 0) - 0.5).abs() < 1e-15);
        assert!((b.correlator(0, 0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn random_behaviours_are_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..200 {
            let psi = hyperspherical_state(&[rng.gen_range(0.0..PI), rng.gen_range(0.0..PI), rng.gen_range(0.0..2.0 * PI)], 2).unwrap();
            let m = |rng: &mut ChaCha8Rng| {
                dichotomic_observable(MeasurementAngles::new(rng.gen_range(0.0..PI), rng.gen_range(0.0..2.0 * PI)).unwrap())
            };
            let alice = [m(&mut rng), m(&mut rng)];
            let bob = [m(&mut rng), m(&mut rng)];
            let b = behaviour_from_quantum(&alice, &bob, &psi).unwrap();
            for x in 0..2 {
                for y in 0..2 {
                    let s: f64 = (0..4).map(|k| b.prob(k / 2, k % 2, x, y)).sum();
                    assert!((s - 1.0).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn shape_checks() {
        assert!(BellGame::new(2, 2, 2, 2, vec![0.5; 4], vec![true; 16]).is_err());
        let game = BellGame::chsh();
        let b = Behaviour::deterministic(&[0, 0, 0], &[0, 0], 2, 2).unwrap();
        assert!(winning_probability(&game, &b).is_err());
    }
}
