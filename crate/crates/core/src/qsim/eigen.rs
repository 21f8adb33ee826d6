//! Extreme eigenpairs of Hermitian operators.
//!
//! Small problems go through cyclic Jacobi rotations on a real symmetric
//! matrix: the operator itself when it is real, otherwise the `2d × 2d`
//! embedding `[[Re H, -Im H], [Im H, Re H]]`, whose spectrum is that of `H`
//! with every eigenvalue doubled. Larger problems use Lanczos with full
//! reorthogonalization; the projected tridiagonal matrix is again
//! diagonalized by Jacobi.

use std::borrow::Cow;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{HermitianMap, LocalSum, Operator, StateVector, C64};
use crate::error::{arg_err, Error, Result};

/// Residual tolerance relative to the operator's norm bound.
pub const RESIDUAL_TOL: f64 = 1e-8;

const JACOBI_MAX_SWEEPS: usize = 100;
const JACOBI_MAX_REAL_DIM: usize = 256;
const LANCZOS_MAX_STEPS: usize = 600;
const LANCZOS_SEED: u64 = 0x6c61_6e63_7a6f_73;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EigenMethod {
    /// Jacobi up to a real dimension of 256, Lanczos above.
    #[default]
    Auto,
    Jacobi,
    Lanczos,
}

/// Eigenvalue with a unit eigenvector and its measured residual
/// `‖H v − λ v‖`.
#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub value: f64,
    pub vector: Vec<C64>,
    pub residual: f64,
}

impl Eigenpair {
    /// The eigenvector as a register state (dimension must be a power of 2).
    pub fn state(&self) -> Result<StateVector> {
        StateVector::normalized(self.vector.clone())
    }
}

/// Dense access for the Jacobi path.
pub trait Densify: HermitianMap {
    fn dense(&self) -> Cow<'_, Operator>;
}

impl Densify for Operator {
    fn dense(&self) -> Cow<'_, Operator> {
        Cow::Borrowed(self)
    }
}

impl Densify for LocalSum {
    fn dense(&self) -> Cow<'_, Operator> {
        Cow::Owned(self.to_operator())
    }
}

/// Smallest or largest eigenvalue of `h` with an eigenvector.
///
/// `Max` is computed as the negated minimum eigenvalue of `-h`.
pub fn extreme_eigenpair(h: &Operator, which: Which) -> Result<Eigenpair> {
    extreme_eigenpair_with(h, which, EigenMethod::Auto)
}

pub fn extreme_eigenpair_with(h: &Operator, which: Which, method: EigenMethod) -> Result<Eigenpair> {
    if !h.is_hermitian() {
        return arg_err("eigensolver requires a Hermitian operator");
    }
    let sign = sign_of(which);
    let pair = match resolve(method, h) {
        EigenMethod::Lanczos => lanczos_min(h, sign)?,
        _ => jacobi_min(h, sign)?,
    };
    let value = sign * pair.0;
    let residual = residual(h, value, &pair.1);
    let bound = h.norm_bound().max(f64::MIN_POSITIVE);
    if residual > RESIDUAL_TOL * bound {
        return Err(Error::NoConvergence { iterations: 0, residual });
    }
    Ok(Eigenpair { value, vector: pair.1, residual })
}

/// Extreme eigenvalue only. Maps up to dimension 128 are densified and go
/// through Jacobi without eigenvector accumulation; larger maps are handled
/// matrix-free by Lanczos.
pub fn extreme_eigenvalue<M: Densify>(h: &M, which: Which) -> Result<f64> {
    let sign = sign_of(which);
    if h.dim() <= JACOBI_MAX_REAL_DIM / 2 {
        let dense = h.dense();
        if !dense.is_hermitian() {
            return arg_err("eigensolver requires a Hermitian operator");
        }
        let (a, n) = real_form(&dense, sign);
        let (vals, _) = jacobi_eigen(a, n, false)?;
        Ok(sign * vals.into_iter().fold(f64::INFINITY, f64::min))
    } else {
        let (v, _) = lanczos_min(h, sign)?;
        Ok(sign * v)
    }
}

/// Public Lanczos entry point for matrix-free maps.
pub fn lanczos_extreme<M: HermitianMap + ?Sized>(h: &M, which: Which) -> Result<Eigenpair> {
    let sign = sign_of(which);
    let (v, vec) = lanczos_min(h, sign)?;
    let value = sign * v;
    let residual = residual(h, value, &vec);
    Ok(Eigenpair { value, vector: vec, residual })
}

fn sign_of(which: Which) -> f64 {
    match which {
        Which::Min => 1.0,
        Which::Max => -1.0,
    }
}

fn resolve(method: EigenMethod, h: &Operator) -> EigenMethod {
    match method {
        EigenMethod::Auto => {
            let real_dim = if h.is_real() { h.dim() } else { 2 * h.dim() };
            if real_dim <= JACOBI_MAX_REAL_DIM {
                EigenMethod::Jacobi
            } else {
                EigenMethod::Lanczos
            }
        }
        m => m,
    }
}

fn residual<M: HermitianMap + ?Sized>(h: &M, value: f64, v: &[C64]) -> f64 {
    let mut hv = vec![C64::new(0.0, 0.0); v.len()];
    h.apply(v, &mut hv);
    hv.iter().zip(v).map(|(a, b)| (a - b * value).norm_sqr()).sum::<f64>().sqrt()
}

/// Real symmetric form of `sign · h`: the matrix itself when real, the
/// doubled embedding otherwise.
fn real_form(h: &Operator, sign: f64) -> (Vec<f64>, usize) {
    let d = h.dim();
    if h.is_real() {
        (h.entries().iter().map(|z| sign * z.re).collect(), d)
    } else {
        let n = 2 * d;
        let mut a = vec![0.0; n * n];
        for i in 0..d {
            for j in 0..d {
                let z = h.get(i, j) * sign;
                a[i * n + j] = z.re;
                a[(i + d) * n + (j + d)] = z.re;
                a[i * n + (j + d)] = -z.im;
                a[(i + d) * n + j] = z.im;
            }
        }
        (a, n)
    }
}

fn jacobi_min(h: &Operator, sign: f64) -> Result<(f64, Vec<C64>)> {
    let d = h.dim();
    let real = h.is_real();
    let (a, n) = real_form(h, sign);
    let (vals, vecs) = jacobi_eigen(a, n, true)?;
    let vecs = vecs.expect("vectors requested");
    let k = argmin(&vals);
    let column = |r: usize| vecs[r * n + k];
    let mut v: Vec<C64> = if real {
        (0..d).map(|r| C64::new(column(r), 0.0)).collect()
    } else {
        (0..d).map(|r| C64::new(column(r), column(r + d))).collect()
    };
    normalize(&mut v);
    Ok((vals[k], v))
}

fn argmin(vals: &[f64]) -> usize {
    vals.iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bv), (i, &v)| if v < bv { (i, v) } else { (bi, bv) })
        .0
}

fn normalize(v: &mut [C64]) {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|z| *z /= norm);
    }
}

/// Cyclic Jacobi eigendecomposition of a real symmetric `n × n` matrix
/// stored row-major. Returns the eigenvalues (unsorted, aligned with the
/// diagonal) and optionally the eigenvectors as columns of a row-major
/// matrix.
pub fn jacobi_eigen(mut a: Vec<f64>, n: usize, vectors: bool) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    if a.len() != n * n {
        return arg_err("jacobi: matrix is not square");
    }
    let mut v = vectors.then(|| {
        let mut id = vec![0.0; n * n];
        (0..n).for_each(|i| id[i * n + i] = 1.0);
        id
    });
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    if scale == 0.0 {
        return Ok((vec![0.0; n], v));
    }
    let target = (f64::EPSILON * scale).powi(2);

    let mut off = off_diagonal_sq(&a, n);
    let mut sweep = 0;
    while off > target {
        if sweep == JACOBI_MAX_SWEEPS {
            return Err(Error::NoConvergence { iterations: sweep, residual: off.sqrt() });
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let (app, aqq) = (a[p * n + p], a[q * n + q]);
                // Negligible relative to both diagonal entries after warm-up.
                if sweep > 3 && apq.abs() * 1e18 < app.abs().min(aqq.abs()) {
                    a[p * n + q] = 0.0;
                    a[q * n + p] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k * n + p], a[k * n + q]);
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p * n + k], a[q * n + k]);
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                if let Some(v) = v.as_mut() {
                    for k in 0..n {
                        let (vkp, vkq) = (v[k * n + p], v[k * n + q]);
                        v[k * n + p] = c * vkp - s * vkq;
                        v[k * n + q] = s * vkp + c * vkq;
                    }
                }
            }
        }
        off = off_diagonal_sq(&a, n);
        sweep += 1;
    }
    Ok(((0..n).map(|i| a[i * n + i]).collect(), v))
}

fn off_diagonal_sq(a: &[f64], n: usize) -> f64 {
    let mut s = 0.0;
    for p in 0..n {
        for q in p + 1..n {
            s += 2.0 * a[p * n + q] * a[p * n + q];
        }
    }
    s
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Lanczos for the minimum eigenvalue of `sign · h`.
fn lanczos_min<M: HermitianMap + ?Sized>(h: &M, sign: f64) -> Result<(f64, Vec<C64>)> {
    let n = h.dim();
    let bound = h.norm_bound().max(f64::MIN_POSITIVE);
    let max_steps = n.min(LANCZOS_MAX_STEPS);

    let mut rng = ChaCha8Rng::seed_from_u64(LANCZOS_SEED);
    let mut v: Vec<C64> = (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    normalize(&mut v);

    let mut basis: Vec<Vec<C64>> = Vec::new();
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = vec![C64::new(0.0, 0.0); n];

    loop {
        h.apply(&v, &mut w);
        if sign != 1.0 {
            w.iter_mut().for_each(|z| *z *= sign);
        }
        let alpha = dot(&v, &w).re;
        for (wi, vi) in w.iter_mut().zip(&v) {
            *wi -= vi * alpha;
        }
        if let (Some(prev), Some(&b)) = (basis.last(), betas.last()) {
            for (wi, pi) in w.iter_mut().zip(prev.iter()) {
                *wi -= pi * b;
            }
        }
        basis.push(std::mem::take(&mut v));
        alphas.push(alpha);
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &w);
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= qi * c;
                }
            }
        }
        let beta = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let k = alphas.len();
        let breakdown = beta <= 1e-13 * bound;
        let exhausted = k >= max_steps;

        if breakdown || exhausted || k % 8 == 0 {
            let (theta, s) = tridiagonal_min(&alphas, &betas)?;
            let estimate = beta * s[k - 1].abs();
            if breakdown || exhausted || estimate <= 1e-2 * RESIDUAL_TOL * bound {
                let mut y = vec![C64::new(0.0, 0.0); n];
                for (q, &sj) in basis.iter().zip(&s) {
                    for (yi, qi) in y.iter_mut().zip(q) {
                        *yi += qi * sj;
                    }
                }
                normalize(&mut y);
                let res = residual(h, sign * theta, &y);
                if res <= RESIDUAL_TOL * bound {
                    return Ok((theta, y));
                }
                if breakdown || exhausted {
                    return Err(Error::NoConvergence { iterations: k, residual: res });
                }
            }
        }
        betas.push(beta);
        v = w.iter().map(|z| z / beta).collect();
    }
}

fn tridiagonal_min(alphas: &[f64], betas: &[f64]) -> Result<(f64, Vec<f64>)> {
    let k = alphas.len();
    let mut t = vec![0.0; k * k];
    for i in 0..k {
        t[i * k + i] = alphas[i];
        if i + 1 < k {
            t[i * k + i + 1] = betas[i];
            t[(i + 1) * k + i] = betas[i];
        }
    }
    let (vals, vecs) = jacobi_eigen(t, k, true)?;
    let vecs = vecs.expect("vectors requested");
    let j = argmin(&vals);
    Ok((vals[j], (0..k).map(|r| vecs[r * k + j]).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::{dichotomic_observable, kron, MeasurementAngles};
    use std::f64::consts::SQRT_2;

    fn random_hermitian(rng: &mut ChaCha8Rng, d: usize, real: bool) -> Operator {
        let mut e = vec![C64::new(0.0, 0.0); d * d];
        for i in 0..d {
            e[i * d + i] = C64::new(rng.gen_range(-1.0..1.0), 0.0);
            for j in i + 1..d {
                let im = if real { 0.0 } else { rng.gen_range(-1.0..1.0) };
                let z = C64::new(rng.gen_range(-1.0..1.0), im);
                e[i * d + j] = z;
                e[j * d + i] = z.conj();
            }
        }
        Operator::from_entries(d, e).unwrap()
    }

    #[test]
    fn pauli_z_minimum() {
        let p = extreme_eigenpair(&Operator::pauli_z(), Which::Min).unwrap();
        assert_eq!(p.value, -1.0);
        assert!(p.vector[0].norm() < 1e-15);
        assert!((p.vector[1].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_identity() {
        let p = extreme_eigenpair(&Operator::identity(4), Which::Min).unwrap();
        assert!((p.value - 1.0).abs() < 1e-15);
        assert!(p.residual < 1e-14);
    }

    #[test]
    fn pauli_y_needs_complex_embedding() {
        let p = extreme_eigenpair(&Operator::pauli_y(), Which::Max).unwrap();
        assert!((p.value - 1.0).abs() < 1e-14);
        assert!(p.residual < 1e-12);
    }

    #[test]
    fn chsh_operator_at_optimum() {
        let obs = |t: f64| dichotomic_observable(MeasurementAngles::zx(t).unwrap());
        let (a1, a2) = (obs(0.0), obs(std::f64::consts::FRAC_PI_2));
        let (b1, b2) = (obs(std::f64::consts::FRAC_PI_4), obs(-std::f64::consts::FRAC_PI_4));
        let mut b = kron(&a1, &b1).unwrap();
        b.add_scaled(1.0, &kron(&a1, &b2).unwrap()).unwrap();
        b.add_scaled(1.0, &kron(&a2, &b1).unwrap()).unwrap();
        b.add_scaled(-1.0, &kron(&a2, &b2).unwrap()).unwrap();
        let p = extreme_eigenpair(&b, Which::Max).unwrap();
        assert!((p.value - 2.0 * SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_hermitian() {
        let nh = Operator::from_real(2, &[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(extreme_eigenpair(&nh, Which::Min), Err(Error::Argument(_))));
    }

    #[test]
    fn lanczos_agrees_with_jacobi() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for &(d, real) in &[(16, false), (40, true), (64, false), (100, false)] {
            let h = random_hermitian(&mut rng, d, real);
            for which in [Which::Min, Which::Max] {
                let j = extreme_eigenpair_with(&h, which, EigenMethod::Jacobi).unwrap();
                let l = extreme_eigenpair_with(&h, which, EigenMethod::Lanczos).unwrap();
                assert!((j.value - l.value).abs() < 1e-9, "d={d}: {} vs {}", j.value, l.value);
            }
        }
    }

    #[test]
    fn value_only_path_matches_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = random_hermitian(&mut rng, 32, false);
        let v = extreme_eigenvalue(&h, Which::Min).unwrap();
        let p = extreme_eigenpair(&h, Which::Min).unwrap();
        assert!((v - p.value).abs() < 1e-12);
    }

    #[test]
    fn jacobi_sorts_nothing_but_diagonalizes() {
        let a = vec![2.0, 1.0, 1.0, 2.0];
        let (vals, _) = jacobi_eigen(a, 2, false).unwrap();
        let mut vals = vals;
        vals.sort_by(f64::total_cmp);
        assert!((vals[0] - 1.0).abs() < 1e-15 && (vals[1] - 3.0).abs() < 1e-15);
    }
}
