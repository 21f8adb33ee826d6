use super::state::accumulate_local;
use super::{max_qubits, Operator, C64};
use crate::error::{arg_err, Error, Result};

/// A Hermitian linear map that can be applied to vectors without
/// materializing it.
pub trait HermitianMap {
    fn dim(&self) -> usize;

    /// `y = H x`; `y` is overwritten.
    fn apply(&self, x: &[C64], y: &mut [C64]);

    /// Upper bound on the spectral norm.
    fn norm_bound(&self) -> f64;
}

impl HermitianMap for Operator {
    fn dim(&self) -> usize {
        Operator::dim(self)
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        self.apply_into(x, y)
    }

    fn norm_bound(&self) -> f64 {
        Operator::norm_bound(self)
    }
}

#[derive(Debug, Clone)]
struct Term {
    sites: Vec<usize>,
    op: Operator,
    coeff: f64,
}

/// Sum of few-qubit Hermitian terms on an `n`-qubit register.
///
/// Bell operators built from one- and two-body correlators are sums of this
/// form; applying them term by term costs `O(terms · 2^n)` instead of
/// `O(4^n)`.
#[derive(Debug, Clone)]
pub struct LocalSum {
    n_qubits: usize,
    terms: Vec<Term>,
}

impl LocalSum {
    pub fn new(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 {
            return arg_err("local sum needs at least one qubit");
        }
        if n_qubits > max_qubits() {
            return Err(Error::Capacity { qubits: n_qubits, limit: max_qubits() });
        }
        Ok(Self { n_qubits, terms: Vec::new() })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Adds `coeff · op` acting on `sites` (first site = most significant
    /// factor of `op`).
    pub fn push(&mut self, coeff: f64, sites: &[usize], op: &Operator) -> Result<()> {
        if op.dim() != 1 << sites.len() {
            return arg_err(format!("term of dim {} cannot act on {} sites", op.dim(), sites.len()));
        }
        if !op.is_hermitian() {
            return arg_err("local terms must be Hermitian");
        }
        for (i, &s) in sites.iter().enumerate() {
            if s >= self.n_qubits {
                return arg_err(format!("site {s} out of range for {} qubits", self.n_qubits));
            }
            if sites[..i].contains(&s) {
                return arg_err(format!("duplicate site {s}"));
            }
        }
        if coeff != 0.0 {
            self.terms.push(Term { sites: sites.to_vec(), op: op.clone(), coeff });
        }
        Ok(())
    }

    /// Adds a multiple of the identity.
    pub fn push_constant(&mut self, c: f64) {
        if c != 0.0 {
            self.terms.push(Term { sites: vec![], op: Operator::identity(1), coeff: c });
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Dense matrix of the sum.
    pub fn to_operator(&self) -> Operator {
        let dim = 1usize << self.n_qubits;
        let mut entries = vec![C64::new(0.0, 0.0); dim * dim];
        let mut column = vec![C64::new(0.0, 0.0); dim];
        let mut image = vec![C64::new(0.0, 0.0); dim];
        for c in 0..dim {
            column.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
            column[c] = C64::new(1.0, 0.0);
            self.apply(&column, &mut image);
            for (r, z) in image.iter().enumerate() {
                entries[r * dim + c] = *z;
            }
        }
        Operator::from_entries_unchecked(dim, entries)
    }
}

impl HermitianMap for LocalSum {
    fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        y.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        for t in &self.terms {
            if t.sites.is_empty() {
                let c = t.coeff * t.op.get(0, 0).re;
                for (yi, xi) in y.iter_mut().zip(x) {
                    *yi += xi * c;
                }
            } else {
                accumulate_local(&t.op, &t.sites, self.n_qubits, t.coeff, x, y);
            }
        }
    }

    fn norm_bound(&self) -> f64 {
        self.terms.iter().map(|t| t.coeff.abs() * t.op.norm_bound()).sum()
    }
}
