use super::{max_qubits, Operator, C64};
use crate::error::{arg_err, Error, Result};

const NORM_TOL: f64 = 1e-10;
const UNITARY_TOL: f64 = 1e-10;
const IMAG_RESIDUE_TOL: f64 = 1e-10;

/// Normalized pure state of an `n`-qubit register.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<C64>,
}

impl StateVector {
    /// Wraps amplitudes whose norm is already 1 within 1e-10.
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        let n_qubits = Self::qubits_of(amplitudes.len())?;
        if amplitudes.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return arg_err("amplitudes must be finite");
        }
        let norm = norm(&amplitudes);
        if (norm - 1.0).abs() > NORM_TOL {
            return arg_err(format!("state norm {norm} differs from 1"));
        }
        Ok(Self { n_qubits, amplitudes })
    }

    /// Rescales arbitrary nonzero amplitudes to unit norm.
    pub fn normalized(mut amplitudes: Vec<C64>) -> Result<Self> {
        let n_qubits = Self::qubits_of(amplitudes.len())?;
        let norm = norm(&amplitudes);
        if !norm.is_finite() || norm == 0.0 {
            return arg_err("cannot normalize a zero or non-finite vector");
        }
        amplitudes.iter_mut().for_each(|z| *z /= norm);
        Ok(Self { n_qubits, amplitudes })
    }

    pub fn from_real(amplitudes: &[f64]) -> Result<Self> {
        Self::new(amplitudes.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    /// Computational basis state `|index⟩`.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        if n_qubits > max_qubits() {
            return Err(Error::Capacity { qubits: n_qubits, limit: max_qubits() });
        }
        let dim = 1usize << n_qubits;
        if index >= dim {
            return arg_err(format!("basis index {index} out of range for {n_qubits} qubits"));
        }
        let mut amplitudes = vec![C64::new(0.0, 0.0); dim];
        amplitudes[index] = C64::new(1.0, 0.0);
        Ok(Self { n_qubits, amplitudes })
    }

    /// `|0…0⟩`.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        Self::basis(n_qubits, 0)
    }

    /// `(|00⟩ + |11⟩)/√2`.
    pub fn phi_plus() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self::from_real(&[h, 0.0, 0.0, h]).expect("normalized")
    }

    fn qubits_of(len: usize) -> Result<usize> {
        if len == 0 || !len.is_power_of_two() {
            return arg_err(format!("state length {len} is not a power of two"));
        }
        let n = len.trailing_zeros() as usize;
        if n > max_qubits() {
            return Err(Error::Capacity { qubits: n, limit: max_qubits() });
        }
        Ok(n)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amplitudes)
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        if self.dim() != other.dim() {
            return arg_err("inner product of states with different dimensions");
        }
        Ok(self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum())
    }

    /// Tensor product `self ⊗ other`; `self` occupies the leading qubits.
    pub fn tensor(&self, other: &StateVector) -> Result<StateVector> {
        let n = self.n_qubits + other.n_qubits;
        if n > max_qubits() {
            return Err(Error::Capacity { qubits: n, limit: max_qubits() });
        }
        let amplitudes = self
            .amplitudes
            .iter()
            .flat_map(|a| other.amplitudes.iter().map(move |b| a * b))
            .collect();
        Ok(StateVector { n_qubits: n, amplitudes })
    }

    /// Largest imaginary component magnitude.
    pub fn max_imag(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `⟨ψ|op|ψ⟩` for Hermitian `op`.
pub fn expectation(op: &Operator, psi: &StateVector) -> Result<f64> {
    if op.dim() != psi.dim() {
        return arg_err(format!("operator dim {} does not match state dim {}", op.dim(), psi.dim()));
    }
    if !op.is_hermitian() {
        return arg_err("expectation requires a Hermitian operator");
    }
    let phi = op.mul_vec(psi.amplitudes())?;
    let value: C64 = psi.amplitudes().iter().zip(&phi).map(|(a, b)| a.conj() * b).sum();
    if value.im.abs() >= IMAG_RESIDUE_TOL {
        return Err(Error::Numerical(format!("expectation has imaginary residue {:e}", value.im)));
    }
    Ok(value.re)
}

/// Applies a `2^k × 2^k` unitary to the listed target qubits; the first
/// target is the most significant qubit of the gate.
pub fn apply_gate(gate: &Operator, targets: &[usize], psi: &StateVector) -> Result<StateVector> {
    let k = targets.len();
    if k == 0 || gate.dim() != 1 << k {
        return arg_err(format!("gate of dim {} cannot act on {k} targets", gate.dim()));
    }
    let n = psi.n_qubits();
    for (i, &t) in targets.iter().enumerate() {
        if t >= n {
            return arg_err(format!("target {t} out of range for {n} qubits"));
        }
        if targets[..i].contains(&t) {
            return arg_err(format!("duplicate target {t}"));
        }
    }
    if !gate.is_unitary(UNITARY_TOL) {
        return arg_err("gate is not unitary");
    }
    let mut out = vec![C64::new(0.0, 0.0); psi.dim()];
    apply_local(gate, targets, n, psi.amplitudes(), &mut out);
    Ok(StateVector { n_qubits: n, amplitudes: out })
}

/// `out = (gate on targets) · input`. No validation; `out` is overwritten.
pub(crate) fn apply_local(gate: &Operator, targets: &[usize], n: usize, input: &[C64], out: &mut [C64]) {
    out.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
    accumulate_local(gate, targets, n, 1.0, input, out);
}

/// `out += scale · (gate on targets) · input`.
pub(crate) fn accumulate_local(
    gate: &Operator,
    targets: &[usize],
    n: usize,
    scale: f64,
    input: &[C64],
    out: &mut [C64],
) {
    let k = targets.len();
    let local_dim = 1usize << k;
    let masks: Vec<usize> = targets.iter().map(|&t| 1usize << (n - 1 - t)).collect();
    let full_mask: usize = masks.iter().sum();
    let spread = |local: usize| -> usize {
        masks
            .iter()
            .enumerate()
            .filter(|(bit, _)| local & (1 << (k - 1 - bit)) != 0)
            .map(|(_, m)| m)
            .sum()
    };
    let offsets: Vec<usize> = (0..local_dim).map(spread).collect();
    for base in 0..input.len() {
        if base & full_mask != 0 {
            continue;
        }
        for col in 0..local_dim {
            let x = input[base | offsets[col]];
            if x.re == 0.0 && x.im == 0.0 {
                continue;
            }
            for row in 0..local_dim {
                let g = gate.get(row, col);
                if g.re == 0.0 && g.im == 0.0 {
                    continue;
                }
                out[base | offsets[row]] += g * x * scale;
            }
        }
    }
}

/// Real pure state from hyperspherical coordinates.
///
/// Amplitude `k` is `sin(a_0)…sin(a_{k-1}) cos(a_k)`; the last amplitude is
/// the product of all sines.
pub fn hyperspherical_state(angles: &[f64], n: usize) -> Result<StateVector> {
    if n > max_qubits() {
        return Err(Error::Capacity { qubits: n, limit: max_qubits() });
    }
    let dim = 1usize << n;
    if angles.len() != dim - 1 {
        return arg_err(format!("{n} qubits need {} hyperspherical angles, got {}", dim - 1, angles.len()));
    }
    if angles.iter().any(|a| !a.is_finite()) {
        return arg_err("hyperspherical angles must be finite");
    }
    let mut amplitudes = Vec::with_capacity(dim);
    let mut sines = 1.0;
    for &a in angles {
        let (s, c) = a.sin_cos();
        amplitudes.push(C64::new(sines * c, 0.0));
        sines *= s;
    }
    amplitudes.push(C64::new(sines, 0.0));
    Ok(StateVector { n_qubits: n, amplitudes })
}
