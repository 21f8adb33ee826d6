use std::f64::consts::TAU;
use std::fmt;

use super::{max_qubits, qubits_for_dim, C64};
use crate::error::{arg_err, Error, Result};

const HERMITIAN_TOL: f64 = 1e-12;

/// Dense square complex matrix.
#[derive(Clone, PartialEq)]
pub struct Operator {
    dim: usize,
    entries: Vec<C64>,
    hermitian: bool,
}

impl fmt::Debug for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Operator({}x{}, hermitian={})", self.dim, self.dim, self.hermitian)?;
        for r in 0..self.dim.min(8) {
            let row: Vec<String> = (0..self.dim.min(8))
                .map(|c| {
                    let z = self.get(r, c);
                    format!("{:+.4}{:+.4}i", z.re, z.im)
                })
                .collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

impl Operator {
    /// Build from row-major entries. Rejects non-finite components.
    pub fn from_entries(dim: usize, entries: Vec<C64>) -> Result<Self> {
        if dim == 0 {
            return arg_err("operator dimension must be positive");
        }
        if entries.len() != dim * dim {
            return arg_err(format!(
                "expected {} entries for a {dim}x{dim} operator, got {}",
                dim * dim,
                entries.len()
            ));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return arg_err("operator entries must be finite");
        }
        Ok(Self::from_entries_unchecked(dim, entries))
    }

    pub(crate) fn from_entries_unchecked(dim: usize, entries: Vec<C64>) -> Self {
        let mut op = Self { dim, entries, hermitian: false };
        op.hermitian = op.check_hermitian(HERMITIAN_TOL);
        op
    }

    /// Build from real row-major entries.
    pub fn from_real(dim: usize, entries: &[f64]) -> Result<Self> {
        Self::from_entries(dim, entries.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    /// Build from nested rows.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return arg_err("operator rows must form a square matrix");
        }
        Self::from_entries(dim, rows.iter().flatten().copied().collect())
    }

    pub fn zeros(dim: usize) -> Self {
        Self { dim, entries: vec![C64::new(0.0, 0.0); dim * dim], hermitian: true }
    }

    pub fn identity(dim: usize) -> Self {
        let mut op = Self::zeros(dim);
        for i in 0..dim {
            op.entries[i * dim + i] = C64::new(1.0, 0.0);
        }
        op
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let mut op = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            op.entries[i * diag.len() + i] = C64::new(d, 0.0);
        }
        op
    }

    pub fn pauli_x() -> Self {
        Self::from_real(2, &[0.0, 1.0, 1.0, 0.0]).expect("static")
    }

    pub fn pauli_y() -> Self {
        let z = C64::new(0.0, 0.0);
        Self::from_entries(2, vec![z, C64::new(0.0, -1.0), C64::new(0.0, 1.0), z]).expect("static")
    }

    pub fn pauli_z() -> Self {
        Self::from_real(2, &[1.0, 0.0, 0.0, -1.0]).expect("static")
    }

    /// Controlled-NOT on two qubits, first factor is the control.
    pub fn cnot() -> Self {
        #[rustfmt::skip]
        let e = [
            1.0, 0.0, 0.0, 0.0,
            0.0, 1.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 1.0,
            0.0, 0.0, 1.0, 0.0,
        ];
        Self::from_real(4, &e).expect("static")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_qubits(&self) -> Option<usize> {
        qubits_for_dim(self.dim)
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.entries[row * self.dim + col]
    }

    /// Cached result of the Hermiticity check done at construction.
    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    fn check_hermitian(&self, tol: f64) -> bool {
        let d = self.dim;
        for i in 0..d {
            for j in i..d {
                if (self.get(i, j) - self.get(j, i).conj()).norm() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// True when every imaginary component is exactly zero.
    pub fn is_real(&self) -> bool {
        self.entries.iter().all(|z| z.im == 0.0)
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        let prod = self.adjoint().matmul(self).expect("same dimension");
        let id = Self::identity(self.dim);
        prod.max_abs_diff(&id) <= tol
    }

    pub fn adjoint(&self) -> Self {
        let d = self.dim;
        let mut out = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                out.push(self.get(j, i).conj());
            }
        }
        Self { dim: d, entries: out, hermitian: self.hermitian }
    }

    pub fn matmul(&self, other: &Operator) -> Result<Self> {
        self.same_dim(other)?;
        let d = self.dim;
        let mut out = vec![C64::new(0.0, 0.0); d * d];
        for i in 0..d {
            for k in 0..d {
                let a = self.entries[i * d + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let row = &other.entries[k * d..(k + 1) * d];
                for (o, b) in out[i * d..(i + 1) * d].iter_mut().zip(row) {
                    *o += a * b;
                }
            }
        }
        Ok(Self::from_entries_unchecked(d, out))
    }

    pub fn add(&self, other: &Operator) -> Result<Self> {
        self.same_dim(other)?;
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a + b).collect();
        Ok(Self::from_entries_unchecked(self.dim, entries))
    }

    pub fn sub(&self, other: &Operator) -> Result<Self> {
        self.same_dim(other)?;
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a - b).collect();
        Ok(Self::from_entries_unchecked(self.dim, entries))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|z| z * s).collect(),
            hermitian: self.hermitian,
        }
    }

    /// `self += s * other`, entrywise.
    pub fn add_scaled(&mut self, s: f64, other: &Operator) -> Result<()> {
        self.same_dim(other)?;
        for (a, b) in self.entries.iter_mut().zip(&other.entries) {
            *a += b * s;
        }
        self.hermitian = self.check_hermitian(HERMITIAN_TOL);
        Ok(())
    }

    pub fn mul_vec(&self, x: &[C64]) -> Result<Vec<C64>> {
        if x.len() != self.dim {
            return arg_err(format!("vector length {} does not match operator dim {}", x.len(), self.dim));
        }
        let mut y = vec![C64::new(0.0, 0.0); self.dim];
        self.apply_into(x, &mut y);
        Ok(y)
    }

    pub(crate) fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        let d = self.dim;
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.entries[i * d..(i + 1) * d].iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Cheap upper bound on the spectral norm: the smaller of the Frobenius
    /// norm and the maximum absolute row sum.
    pub fn norm_bound(&self) -> f64 {
        let d = self.dim;
        let frob = self.entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let row = (0..d)
            .map(|i| self.entries[i * d..(i + 1) * d].iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max);
        frob.min(row)
    }

    fn same_dim(&self, other: &Operator) -> Result<()> {
        if self.dim != other.dim {
            return arg_err(format!("dimension mismatch: {} vs {}", self.dim, other.dim));
        }
        Ok(())
    }
}

/// Kronecker product with the usual row-major block layout.
pub fn kron(a: &Operator, b: &Operator) -> Result<Operator> {
    let dim = a.dim.checked_mul(b.dim).ok_or(Error::Capacity { qubits: usize::MAX, limit: max_qubits() })?;
    let limit = max_qubits();
    if dim > (1usize << limit) {
        let qubits = usize::BITS as usize - (dim - 1).leading_zeros() as usize;
        return Err(Error::Capacity { qubits, limit });
    }
    let mut out = vec![C64::new(0.0, 0.0); dim * dim];
    let (da, db) = (a.dim, b.dim);
    for i in 0..da {
        for j in 0..da {
            let x = a.get(i, j);
            if x.re == 0.0 && x.im == 0.0 {
                continue;
            }
            for k in 0..db {
                let row = (i * db + k) * dim + j * db;
                for l in 0..db {
                    out[row + l] = x * b.get(k, l);
                }
            }
        }
    }
    Ok(Operator::from_entries_unchecked(dim, out))
}

/// `I ⊗ … ⊗ op ⊗ … ⊗ I` with `op` on `site` of an `n`-qubit register.
pub fn embed(op: &Operator, site: usize, n: usize) -> Result<Operator> {
    if op.dim != 2 {
        return arg_err("embed expects a single-qubit operator");
    }
    if site >= n {
        return arg_err(format!("site {site} out of range for {n} qubits"));
    }
    if n > max_qubits() {
        return Err(Error::Capacity { qubits: n, limit: max_qubits() });
    }
    let left = Operator::identity(1 << site);
    let right = Operator::identity(1 << (n - site - 1));
    kron(&kron(&left, op)?, &right)
}

/// Polar and azimuthal angle of a dichotomic qubit measurement direction.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MeasurementAngles {
    pub theta: f64,
    pub phi: f64,
}

impl MeasurementAngles {
    /// Angles are reduced into `[0, 2π)`.
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !theta.is_finite() || !phi.is_finite() {
            return arg_err("measurement angles must be finite");
        }
        Ok(Self { theta: theta.rem_euclid(TAU), phi: phi.rem_euclid(TAU) })
    }

    /// Direction in the z–x plane.
    pub fn zx(theta: f64) -> Result<Self> {
        Self::new(theta, 0.0)
    }
}

/// `cos θ σz + sin θ cos φ σx + sin θ sin φ σy`.
pub fn dichotomic_observable(angles: MeasurementAngles) -> Operator {
    let (st, ct) = angles.theta.sin_cos();
    let (sp, cp) = angles.phi.sin_cos();
    let (nx, ny, nz) = (st * cp, st * sp, ct);
    let entries = vec![
        C64::new(nz, 0.0),
        C64::new(nx, -ny),
        C64::new(nx, ny),
        C64::new(-nz, 0.0),
    ];
    Operator::from_entries_unchecked(2, entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn int_matrix(rng: &mut ChaCha8Rng, d: usize) -> Operator {
        let e: Vec<C64> = (0..d * d)
            .map(|_| C64::new(rng.gen_range(-3..=3) as f64, rng.gen_range(-3..=3) as f64))
            .collect();
        Operator::from_entries(d, e).unwrap()
    }

    #[test]
    fn kron_identities_and_paulis() {
        let i4 = kron(&Operator::identity(2), &Operator::identity(2)).unwrap();
        assert_eq!(i4, Operator::identity(4));
        let zz = kron(&Operator::pauli_z(), &Operator::pauli_z()).unwrap();
        assert_eq!(zz, Operator::diagonal(&[1.0, -1.0, -1.0, 1.0]));
    }

    #[test]
    fn kron_is_associative_on_integer_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let (a, b, c) = (int_matrix(&mut rng, 2), int_matrix(&mut rng, 3), int_matrix(&mut rng, 2));
            let left = kron(&kron(&a, &b).unwrap(), &c).unwrap();
            let right = kron(&a, &kron(&b, &c).unwrap()).unwrap();
            assert_eq!(left.entries(), right.entries());
        }
    }

    #[test]
    fn kron_refuses_oversized_registers() {
        let big = Operator::identity(1 << 7);
        match kron(&big, &big) {
            Err(Error::Capacity { qubits: 14, limit: 12 }) => {}
            other => panic!("expected capacity error, got {other:?}"),
        }
    }

    #[test]
    fn embed_places_operator_on_site() {
        let z = Operator::pauli_z();
        assert_eq!(embed(&z, 0, 1).unwrap(), z);
        assert_eq!(embed(&z, 0, 2).unwrap(), kron(&z, &Operator::identity(2)).unwrap());
        assert!(matches!(embed(&z, 2, 2), Err(Error::Argument(_))));
    }

    #[test]
    fn observable_special_angles() {
        let z = dichotomic_observable(MeasurementAngles::new(0.0, 0.0).unwrap());
        assert!(z.max_abs_diff(&Operator::pauli_z()) < 1e-15);
        let x = dichotomic_observable(MeasurementAngles::new(FRAC_PI_2, 0.0).unwrap());
        assert!(x.max_abs_diff(&Operator::pauli_x()) < 1e-15);
        let y = dichotomic_observable(MeasurementAngles::new(FRAC_PI_2, FRAC_PI_2).unwrap());
        assert!(y.max_abs_diff(&Operator::pauli_y()) < 1e-15);
    }

    #[test]
    fn observable_squares_to_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let id = Operator::identity(2);
        for _ in 0..1000 {
            let a = MeasurementAngles::new(rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.0..2.0 * PI)).unwrap();
            let m = dichotomic_observable(a);
            assert!(m.is_hermitian());
            assert!(m.matmul(&m).unwrap().max_abs_diff(&id) < 1e-12);
        }
    }

    #[test]
    fn rejects_non_finite_entries() {
        assert!(Operator::from_real(1, &[f64::NAN]).is_err());
        assert!(MeasurementAngles::new(f64::INFINITY, 0.0).is_err());
    }

    #[test]
    fn hermitian_flag_tracks_content() {
        assert!(Operator::pauli_y().is_hermitian());
        let nh = Operator::from_real(2, &[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!(!nh.is_hermitian());
    }
}
