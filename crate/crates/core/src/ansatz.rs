//! Hardware-efficient variational circuit.
//!
//! Starting from `|0…0⟩`, each of `d` layers applies `exp(iθσy)` to every
//! qubit and then a ring of CNOTs `(0→1), (1→2), …, (N−1→0)`; a final row of
//! rotations follows the last layer. All amplitudes stay real.

use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Result};
use crate::qsim::{Operator, StateVector, C64};

/// Rotation angles of a `layers`-deep circuit on `n_qubits` qubits, stored
/// row-major as `(layers + 1) × n_qubits`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams {
    n_qubits: usize,
    layers: usize,
    angles: Vec<f64>,
}

impl CircuitParams {
    pub fn new(n_qubits: usize, layers: usize, angles: Vec<f64>) -> Result<Self> {
        if n_qubits == 0 {
            return arg_err("circuit needs at least one qubit");
        }
        if angles.len() != (layers + 1) * n_qubits {
            return arg_err(format!(
                "{layers}-layer circuit on {n_qubits} qubits needs {} angles, got {}",
                (layers + 1) * n_qubits,
                angles.len()
            ));
        }
        if angles.iter().any(|a| !a.is_finite()) {
            return arg_err("circuit angles must be finite");
        }
        Ok(Self { n_qubits, layers, angles })
    }

    pub fn zeros(n_qubits: usize, layers: usize) -> Result<Self> {
        Self::new(n_qubits, layers, vec![0.0; (layers + 1) * n_qubits])
    }

    /// Number of angles a circuit of this shape consumes.
    pub fn count(n_qubits: usize, layers: usize) -> usize {
        (layers + 1) * n_qubits
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn row(&self, layer: usize) -> &[f64] {
        &self.angles[layer * self.n_qubits..(layer + 1) * self.n_qubits]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.angles.chunks(self.n_qubits).map(<[f64]>::to_vec).collect()
    }
}

/// `exp(iθσy) = [[cos θ, sin θ], [−sin θ, cos θ]]`.
pub fn ry_gate(theta: f64) -> Operator {
    let (s, c) = theta.sin_cos();
    Operator::from_real(2, &[c, s, -s, c]).expect("finite for finite theta")
}

/// CNOT(q → q+1 mod N) for q = 0, …, N−1, applied in that order.
pub fn cnot_ring(psi: &StateVector) -> Result<StateVector> {
    let n = psi.n_qubits();
    if n < 2 {
        return arg_err("CNOT ring needs at least two qubits");
    }
    let mut amps = psi.amplitudes().to_vec();
    ring_in_place(&mut amps, n);
    StateVector::new(amps)
}

/// Runs the circuit on `|0…0⟩`.
pub fn build_state(params: &CircuitParams) -> Result<StateVector> {
    let n = params.n_qubits;
    let mut amps = vec![0.0; 1 << n];
    amps[0] = 1.0;
    for layer in 0..params.layers {
        rotate_all(&mut amps, n, params.row(layer));
        if n >= 2 {
            ring_real(&mut amps, n);
        }
    }
    rotate_all(&mut amps, n, params.row(params.layers));
    StateVector::new(amps.into_iter().map(|x| C64::new(x, 0.0)).collect())
}

fn rotate_all(amps: &mut [f64], n: usize, row: &[f64]) {
    for (q, &theta) in row.iter().enumerate() {
        let (s, c) = theta.sin_cos();
        let mask = 1usize << (n - 1 - q);
        for i in 0..amps.len() {
            if i & mask == 0 {
                let (a0, a1) = (amps[i], amps[i | mask]);
                amps[i] = c * a0 + s * a1;
                amps[i | mask] = -s * a0 + c * a1;
            }
        }
    }
}

fn cnot_masks(n: usize, q: usize) -> (usize, usize) {
    (1usize << (n - 1 - q), 1usize << (n - 1 - (q + 1) % n))
}

fn ring_real(amps: &mut [f64], n: usize) {
    for q in 0..n {
        let (control, target) = cnot_masks(n, q);
        for i in 0..amps.len() {
            if i & control != 0 && i & target == 0 {
                amps.swap(i, i | target);
            }
        }
    }
}

fn ring_in_place(amps: &mut [C64], n: usize) {
    for q in 0..n {
        let (control, target) = cnot_masks(n, q);
        for i in 0..amps.len() {
            if i & control != 0 && i & target == 0 {
                amps.swap(i, i | target);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::{apply_gate, hyperspherical_state};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn ry_special_values() {
        assert!(ry_gate(0.0).max_abs_diff(&Operator::identity(2)) < 1e-15);
        let g = ry_gate(FRAC_PI_2);
        let expected = Operator::from_real(2, &[0.0, 1.0, -1.0, 0.0]).unwrap();
        assert!(g.max_abs_diff(&expected) < 1e-15);
        let out = apply_gate(&g, &[0], &StateVector::zero(1).unwrap()).unwrap();
        assert!((out.amplitudes()[1].re + 1.0).abs() < 1e-15);
    }

    #[test]
    fn ry_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            assert!(ry_gate(rng.gen_range(-10.0..10.0)).is_unitary(1e-12));
        }
    }

    #[test]
    fn ring_on_basis_states() {
        let zero = StateVector::zero(2).unwrap();
        assert_eq!(cnot_ring(&zero).unwrap(), zero);
        // |10> -> CNOT(0,1) -> |11> -> CNOT(1,0) -> |01>
        let ten = StateVector::basis(2, 0b10).unwrap();
        assert_eq!(cnot_ring(&ten).unwrap(), StateVector::basis(2, 0b01).unwrap());
        assert!(cnot_ring(&StateVector::zero(1).unwrap()).is_err());
    }

    #[test]
    fn ring_matches_gate_sequence() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for n in 2..=5 {
            let angles: Vec<f64> = (0..(1 << n) - 1).map(|_| rng.gen_range(0.0..3.0)).collect();
            let psi = hyperspherical_state(&angles, n).unwrap();
            let mut slow = psi.clone();
            for q in 0..n {
                slow = apply_gate(&Operator::cnot(), &[q, (q + 1) % n], &slow).unwrap();
            }
            let fast = cnot_ring(&psi).unwrap();
            assert_eq!(fast, slow);
            assert!((fast.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn trivial_circuits_stay_at_zero() {
        for (n, d) in [(3, 0), (3, 1), (1, 2)] {
            let psi = build_state(&CircuitParams::zeros(n, d).unwrap()).unwrap();
            assert_eq!(psi, StateVector::zero(n).unwrap());
        }
    }

    #[test]
    fn circuit_matches_gate_by_gate_simulation() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (n, d) = (4, 3);
        let angles: Vec<f64> = (0..CircuitParams::count(n, d)).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let params = CircuitParams::new(n, d, angles).unwrap();
        let mut psi = StateVector::zero(n).unwrap();
        for layer in 0..=d {
            for q in 0..n {
                psi = apply_gate(&ry_gate(params.row(layer)[q]), &[q], &psi).unwrap();
            }
            if layer < d {
                psi = cnot_ring(&psi).unwrap();
            }
        }
        let fast = build_state(&params).unwrap();
        for (a, b) in fast.amplitudes().iter().zip(psi.amplitudes()) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!(fast.max_imag() == 0.0);
        assert_eq!(build_state(&params).unwrap(), fast);
    }

    #[test]
    fn shape_is_validated() {
        assert!(CircuitParams::new(2, 1, vec![0.0; 3]).is_err());
        assert!(CircuitParams::new(2, 1, vec![f64::NAN; 4]).is_err());
        assert_eq!(CircuitParams::zeros(4, 3).unwrap().rows().len(), 4);
    }
}
